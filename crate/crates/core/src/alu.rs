//! Elastic arithmetic units and the fidelity context that steers them.
//!
//! Kernels are written against the [`Alu`] trait. Every add, sub, mul and
//! shift they perform on data goes through it, and the result is passed
//! through the fault spec of the innermost active region. Comparisons, loop
//! counters and addressing are ordinary Rust and never faulty.
//!
//! [`Exact`] implements the trait with plain wrapping arithmetic; encoders use
//! it for their local reconstruction loop. [`FidelityContext`] is the faulty
//! implementation used by decoders under test.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::fault::{FaultSpec, Injector};
use crate::rng::RngStream;

/// Name of the region that is always fully reliable.
pub const RELIABLE: &str = "reliable";

/// Region name to fault spec, as written in experiment configs.
pub type RegionTable = BTreeMap<String, FaultSpec>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UsageError {
    #[error("exit_region called with only the reliable region active")]
    ExitAtBottom,
    #[error("region names must be non-empty")]
    EmptyName,
    #[error("the reserved region \"reliable\" cannot be given a non-zero rate")]
    ReliableOverride,
}

/// Handle to a region slot, resolved once per decode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RegionId(usize);

impl RegionId {
    pub const RELIABLE: RegionId = RegionId(0);
}

/// An arithmetic unit that may corrupt results.
///
/// Implementors only provide the bus; every operation is defined in terms of
/// it so faulty and exact execution share one definition of the arithmetic.
pub trait Alu {
    /// Resolves a region name. Unknown names map to a reliable slot.
    fn region(&mut self, name: &str) -> RegionId;
    fn enter(&mut self, region: RegionId);
    fn leave(&mut self);
    /// Drives `exact` onto the 32-bit result bus of the active unit.
    fn bus(&mut self, exact: u32) -> u32;

    #[inline(always)]
    fn add(&mut self, a: i32, b: i32) -> i32 {
        self.bus(a.wrapping_add(b) as u32) as i32
    }

    #[inline(always)]
    fn sub(&mut self, a: i32, b: i32) -> i32 {
        self.bus(a.wrapping_sub(b) as u32) as i32
    }

    #[inline(always)]
    fn mul(&mut self, a: i32, b: i32) -> i32 {
        self.bus(a.wrapping_mul(b) as u32) as i32
    }

    #[inline(always)]
    fn shl(&mut self, a: i32, s: u32) -> i32 {
        self.bus(a.wrapping_shl(s) as u32) as i32
    }

    /// Arithmetic right shift.
    #[inline(always)]
    fn shr(&mut self, a: i32, s: u32) -> i32 {
        self.bus(a.wrapping_shr(s) as u32) as i32
    }

    /// 16-bit add: the bus is 32 bits wide but only the low half is kept,
    /// so flips above bit 15 vanish.
    #[inline(always)]
    fn add16(&mut self, a: i16, b: i16) -> i16 {
        self.bus(i32::from(a.wrapping_add(b)) as u32) as i16
    }

    #[inline(always)]
    fn sub16(&mut self, a: i16, b: i16) -> i16 {
        self.bus(i32::from(a.wrapping_sub(b)) as u32) as i16
    }

    #[inline(always)]
    fn mul16(&mut self, a: i16, b: i16) -> i16 {
        self.bus((i32::from(a) * i32::from(b)) as u32) as i16
    }

    #[inline(always)]
    fn shr16(&mut self, a: i16, s: u32) -> i16 {
        self.bus(i32::from(a.wrapping_shr(s)) as u32) as i16
    }

    /// Saturating 16-bit add, as on a DSP datapath.
    #[inline(always)]
    fn add16_sat(&mut self, a: i16, b: i16) -> i16 {
        self.bus(i32::from(a.saturating_add(b)) as u32) as i16
    }

    #[inline(always)]
    fn sub16_sat(&mut self, a: i16, b: i16) -> i16 {
        self.bus(i32::from(a.saturating_sub(b)) as u32) as i16
    }
}

/// Fault-free arithmetic.
#[derive(Clone, Copy, Debug, Default)]
pub struct Exact;

impl Alu for Exact {
    #[inline(always)]
    fn region(&mut self, _name: &str) -> RegionId {
        RegionId::RELIABLE
    }

    #[inline(always)]
    fn enter(&mut self, _region: RegionId) {}

    #[inline(always)]
    fn leave(&mut self) {}

    #[inline(always)]
    fn bus(&mut self, exact: u32) -> u32 {
        exact
    }
}

#[derive(Clone, Debug)]
struct Slot {
    name: String,
    spec: FaultSpec,
    injector: Injector,
    stream: RngStream,
    ops: u64,
    flips: u64,
}

/// Maps region names to fault specs and tracks which region is executing.
///
/// Each region owns a stream derived from the context root by region name,
/// so a region's fault pattern does not depend on what other regions did.
#[derive(Clone, Debug)]
pub struct FidelityContext {
    slots: Vec<Slot>,
    stack: Vec<usize>,
    active: usize,
    root: RngStream,
}

impl FidelityContext {
    pub fn new(regions: &RegionTable, root: RngStream) -> Result<Self, UsageError> {
        let mut ctx = FidelityContext {
            slots: Vec::with_capacity(regions.len() + 1),
            stack: vec![0],
            active: 0,
            root,
        };
        ctx.push_slot(RELIABLE, FaultSpec::RELIABLE);
        for (name, spec) in regions {
            if name.is_empty() {
                return Err(UsageError::EmptyName);
            }
            if name == RELIABLE {
                if !spec.is_reliable() {
                    return Err(UsageError::ReliableOverride);
                }
                continue;
            }
            ctx.push_slot(name, *spec);
        }
        Ok(ctx)
    }

    /// A context with no faulty regions.
    pub fn reliable() -> Self {
        Self::new(&RegionTable::new(), crate::rng::derive_stream(0, &[]))
            .expect("empty table is valid")
    }

    fn push_slot(&mut self, name: &str, spec: FaultSpec) -> usize {
        let stream = self.root.child(name);
        self.slots.push(Slot {
            name: name.to_string(),
            spec,
            injector: spec.compile(),
            stream,
            ops: 0,
            flips: 0,
        });
        self.slots.len() - 1
    }

    fn lookup(&mut self, name: &str) -> usize {
        match self.slots.iter().position(|s| s.name == name) {
            Some(i) => i,
            None => self.push_slot(name, FaultSpec::RELIABLE),
        }
    }

    pub fn enter_region(&mut self, name: &str) {
        let i = self.lookup(name);
        self.stack.push(i);
        self.active = i;
    }

    pub fn exit_region(&mut self) -> Result<(), UsageError> {
        if self.stack.len() <= 1 {
            return Err(UsageError::ExitAtBottom);
        }
        self.stack.pop();
        self.active = self.top();
        Ok(())
    }

    pub fn active_region(&self) -> &str {
        &self.slots[self.top()].name
    }

    pub fn active_spec(&self) -> FaultSpec {
        self.slots[self.top()].spec
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    /// Elastic operations executed per region name, including zero counts
    /// for regions that were entered but did no arithmetic.
    pub fn op_counts(&self) -> BTreeMap<String, u64> {
        self.slots.iter().map(|s| (s.name.clone(), s.ops)).collect()
    }

    /// Results that were actually corrupted, per region.
    pub fn flip_counts(&self) -> BTreeMap<String, u64> {
        self.slots.iter().map(|s| (s.name.clone(), s.flips)).collect()
    }

    fn top(&self) -> usize {
        // The stack always holds the reliable slot at the bottom.
        *self.stack.last().unwrap_or(&0)
    }
}

impl Alu for FidelityContext {
    fn region(&mut self, name: &str) -> RegionId {
        RegionId(self.lookup(name))
    }

    #[inline(always)]
    fn enter(&mut self, region: RegionId) {
        self.stack.push(region.0);
        self.active = region.0;
    }

    #[inline(always)]
    fn leave(&mut self) {
        debug_assert!(self.stack.len() > 1, "unbalanced region exit");
        if self.stack.len() > 1 {
            self.stack.pop();
        }
        self.active = self.top();
    }

    #[inline(always)]
    fn bus(&mut self, exact: u32) -> u32 {
        let slot = &mut self.slots[self.active];
        slot.ops += 1;
        if !slot.injector.is_active() {
            return exact;
        }
        let mask = slot.injector.flip_mask(&mut slot.stream);
        if mask != 0 {
            slot.flips += 1;
        }
        exact ^ mask
    }
}
