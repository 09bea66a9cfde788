//! Asynchronous control data: which blocks are activated at each iteration,
//! and which (possibly stale) iterate each activation reads.
//!
//! A schedule is admissible when
//! - iteration 0 activates every block,
//! - every window of `M` consecutive iterations activates every block,
//! - every read index lies in `[max(0, n − D), n]`.
//!
//! Block indices are 0-based.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blockspace::PrimalDualPoint;
use crate::error::{Error, Result};

/// One activated block and the iteration whose iterate it reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Activation {
    pub block: usize,
    pub read: usize,
}

/// Activations of one iteration, in increasing block order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Step {
    pub primal: Vec<Activation>,
    pub dual: Vec<Activation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlSchedule {
    steps: Vec<Step>,
    window: usize,
    max_lag: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    InvalidWindow,
    EmptyHorizon,
    IncompleteStart,
    EmptyBlockSet,
    IndexOutOfRange,
    DuplicateIndex,
    CoverageGap,
    LagExceedsBound,
    FutureRead,
}

impl ViolationKind {
    pub fn description(self) -> &'static str {
        match self {
            ViolationKind::InvalidWindow => "window M must be at least 1",
            ViolationKind::EmptyHorizon => "schedule has no iterations",
            ViolationKind::IncompleteStart => "iteration 0 must activate every block",
            ViolationKind::EmptyBlockSet => "empty block set",
            ViolationKind::IndexOutOfRange => "block index out of range",
            ViolationKind::DuplicateIndex => "block activated twice in one iteration",
            ViolationKind::CoverageGap => "block not activated within a window of M iterations",
            ViolationKind::LagExceedsBound => "lag exceeds D",
            ViolationKind::FutureRead => "read index is in the future",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleViolation {
    pub kind: ViolationKind,
    /// First offending iteration.
    pub n: usize,
    pub detail: String,
}

impl std::fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} at n={}", self.kind.description(), self.n)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certification {
    Certified,
    Violation(ScheduleViolation),
}

impl Certification {
    pub fn is_certified(&self) -> bool {
        matches!(self, Certification::Certified)
    }
}

/// Lag pattern for [`ControlSchedule::periodic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagPattern {
    Zero,
    /// Every read is `max(0, n − d)`.
    Constant(usize),
    /// Lag cycles `0, 1, …, max, 0, 1, …`.
    Sawtooth(usize),
}

impl LagPattern {
    fn bound(self) -> usize {
        match self {
            LagPattern::Zero => 0,
            LagPattern::Constant(d) | LagPattern::Sawtooth(d) => d,
        }
    }

    fn read(self, n: usize) -> usize {
        match self {
            LagPattern::Zero => n,
            LagPattern::Constant(d) => n.saturating_sub(d),
            LagPattern::Sawtooth(d) => n - n % (d + 1),
        }
    }
}

fn full(count: usize, read: usize) -> Vec<Activation> {
    (0..count).map(|block| Activation { block, read }).collect()
}

impl ControlSchedule {
    /// Wraps explicit steps with declared bounds `M` (window) and `D` (max lag).
    /// Call [`ControlSchedule::validate`] to certify them.
    pub fn new(steps: Vec<Step>, window: usize, max_lag: usize) -> Self {
        let mut steps = steps;
        for s in &mut steps {
            s.primal.sort_by_key(|a| a.block);
            s.dual.sort_by_key(|a| a.block);
        }
        ControlSchedule {
            steps,
            window,
            max_lag,
        }
    }

    /// Every block active at every iteration, no lag (`M = 1`, `D = 0`).
    pub fn synchronous(m: usize, p: usize, horizon: usize) -> Self {
        let steps = (0..horizon.max(1))
            .map(|n| Step {
                primal: full(m, n),
                dual: full(p, n),
            })
            .collect();
        ControlSchedule {
            steps,
            window: 1,
            max_lag: 0,
        }
    }

    /// Round-robin groups of `group_size` blocks after a full first iteration.
    pub fn periodic(m: usize, p: usize, group_size: usize, lag: LagPattern, horizon: usize) -> Result<Self> {
        if m == 0 || p == 0 || group_size == 0 {
            return Err(Error::Schedule(
                "periodic schedule needs m, p, group_size >= 1".into(),
            ));
        }
        let groups_m = m.div_ceil(group_size);
        let groups_p = p.div_ceil(group_size);
        let window = groups_m.max(groups_p);
        let horizon = horizon.max(window);
        let group = |count: usize, groups: usize, n: usize| -> Vec<usize> {
            let g = (n - 1) % groups;
            (g * group_size..((g + 1) * group_size).min(count)).collect()
        };
        let steps = (0..horizon)
            .map(|n| {
                let read = lag.read(n);
                if n == 0 {
                    return Step {
                        primal: full(m, read),
                        dual: full(p, read),
                    };
                }
                Step {
                    primal: group(m, groups_m, n)
                        .into_iter()
                        .map(|block| Activation { block, read })
                        .collect(),
                    dual: group(p, groups_p, n)
                        .into_iter()
                        .map(|block| Activation { block, read })
                        .collect(),
                }
            })
            .collect();
        Ok(ControlSchedule {
            steps,
            window,
            max_lag: lag.bound(),
        })
    }

    /// Seeded random subsets with a coverage fallback: any block not
    /// activated in the previous `M − 1` iterations is forced in. Reads are
    /// uniform in `[max(0, n − D), n]`.
    pub fn random_admissible(m: usize, p: usize, window: usize, max_lag: usize, seed: u64, horizon: usize) -> Result<Self> {
        if m == 0 || p == 0 || window == 0 {
            return Err(Error::Schedule(
                "random schedule needs m, p, M >= 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let horizon = horizon.max(window);
        let mut primal_sets: Vec<Vec<usize>> = Vec::with_capacity(horizon);
        let mut dual_sets: Vec<Vec<usize>> = Vec::with_capacity(horizon);
        let mut steps = Vec::with_capacity(horizon);

        let pick = |rng: &mut ChaCha8Rng, count: usize, history: &[Vec<usize>], n: usize| -> Vec<usize> {
            let mut chosen: Vec<bool> = (0..count).map(|_| rng.gen_bool(0.5)).collect();
            let lookback = (window - 1).min(n);
            for (j, c) in chosen.iter_mut().enumerate() {
                let recent = history[n - lookback..n].iter().any(|s| s.contains(&j));
                if !recent {
                    *c = true;
                }
            }
            if !chosen.iter().any(|&c| c) {
                let j = rng.gen_range(0..count);
                chosen[j] = true;
            }
            (0..count).filter(|&j| chosen[j]).collect()
        };

        for n in 0..horizon {
            let (ps, ds) = if n == 0 {
                ((0..m).collect(), (0..p).collect())
            } else {
                let ps = pick(&mut rng, m, &primal_sets, n);
                let ds = pick(&mut rng, p, &dual_sets, n);
                (ps, ds)
            };
            let lo = n.saturating_sub(max_lag);
            let mut lagged = |blocks: &[usize]| -> Vec<Activation> {
                blocks
                    .iter()
                    .map(|&block| Activation {
                        block,
                        read: rng.gen_range(lo..=n),
                    })
                    .collect()
            };
            let step = Step {
                primal: lagged(&ps),
                dual: lagged(&ds),
            };
            steps.push(step);
            primal_sets.push(ps);
            dual_sets.push(ds);
        }
        Ok(ControlSchedule {
            steps,
            window,
            max_lag,
        })
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Declared `M`.
    pub fn window(&self) -> usize {
        self.window
    }

    /// Declared `D`.
    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Step `n`; past the horizon the last `M` steps repeat with their lag
    /// offsets preserved, which keeps the schedule admissible.
    pub fn step(&self, n: usize) -> Step {
        let horizon = self.steps.len();
        if n < horizon {
            return self.steps[n].clone();
        }
        let period = self.window.min(horizon).max(1);
        let src = horizon - period + (n - horizon) % period;
        let shift = |acts: &[Activation]| -> Vec<Activation> {
            acts.iter()
                .map(|a| Activation {
                    block: a.block,
                    read: n - (src - a.read),
                })
                .collect()
        };
        let s = &self.steps[src];
        Step {
            primal: shift(&s.primal),
            dual: shift(&s.dual),
        }
    }

    /// Checks the schedule against `m` primal and `p` dual blocks.
    pub fn validate(&self, m: usize, p: usize) -> Certification {
        let fail = |kind, n, detail: String| Certification::Violation(ScheduleViolation { kind, n, detail });
        if self.window == 0 {
            return fail(ViolationKind::InvalidWindow, 0, String::new());
        }
        if self.steps.is_empty() {
            return fail(ViolationKind::EmptyHorizon, 0, String::new());
        }
        for (n, step) in self.steps.iter().enumerate() {
            for (side, acts, count) in [("primal", &step.primal, m), ("dual", &step.dual, p)] {
                if acts.is_empty() {
                    return fail(ViolationKind::EmptyBlockSet, n, format!("{side} set"));
                }
                let mut seen = vec![false; count];
                for a in acts {
                    if a.block >= count {
                        return fail(
                            ViolationKind::IndexOutOfRange,
                            n,
                            format!("{side} block {} of {count}", a.block),
                        );
                    }
                    if seen[a.block] {
                        return fail(ViolationKind::DuplicateIndex, n, format!("{side} block {}", a.block));
                    }
                    seen[a.block] = true;
                    if a.read > n {
                        return fail(
                            ViolationKind::FutureRead,
                            n,
                            format!("{side} block {} reads iteration {}", a.block, a.read),
                        );
                    }
                    if a.read + self.max_lag < n {
                        return fail(
                            ViolationKind::LagExceedsBound,
                            n,
                            format!(
                                "{side} block {} reads iteration {} with D={}",
                                a.block, a.read, self.max_lag
                            ),
                        );
                    }
                }
                if n == 0 && seen.iter().any(|s| !s) {
                    return fail(ViolationKind::IncompleteStart, 0, format!("{side} set"));
                }
            }
        }
        // every window [n, n+M-1] inside the horizon covers every block
        let horizon = self.steps.len();
        if horizon >= self.window {
            for (side, count, sets) in [
                ("primal", m, self.steps.iter().map(|s| &s.primal).collect::<Vec<_>>()),
                ("dual", p, self.steps.iter().map(|s| &s.dual).collect::<Vec<_>>()),
            ] {
                // last activation of each block; a gap longer than M is a violation
                let mut last = vec![0usize; count];
                for (n, acts) in sets.iter().enumerate() {
                    for a in acts.iter() {
                        last[a.block] = n;
                    }
                    if n + 1 >= self.window {
                        let start = n + 1 - self.window;
                        if let Some(j) = (0..count).find(|&j| last[j] < start) {
                            return fail(
                                ViolationKind::CoverageGap,
                                start,
                                format!("{side} block {j} missing from iterations {start}..={n}"),
                            );
                        }
                    }
                }
            }
        }
        Certification::Certified
    }
}

/// Ring of the last `D + 1` iterates, addressed by absolute iteration number.
#[derive(Debug, Clone)]
pub struct LagBuffer<T> {
    max_lag: usize,
    entries: VecDeque<(usize, PrimalDualPoint<T>)>,
}

impl<T: Clone> LagBuffer<T> {
    pub fn new(max_lag: usize) -> Self {
        LagBuffer {
            max_lag,
            entries: VecDeque::with_capacity(max_lag + 1),
        }
    }

    /// Stores iterate `n` and evicts everything older than `n − D`.
    pub fn push(&mut self, n: usize, point: PrimalDualPoint<T>) {
        debug_assert!(self.entries.back().is_none_or(|(last, _)| *last + 1 == n));
        self.entries.push_back((n, point));
        let oldest = n.saturating_sub(self.max_lag);
        while self.entries.front().is_some_and(|(j, _)| *j < oldest) {
            self.entries.pop_front();
        }
    }

    pub fn get(&self, j: usize) -> Option<&PrimalDualPoint<T>> {
        let (first, _) = self.entries.front()?;
        self.entries.get(j.checked_sub(*first)?).map(|(_, p)| p)
    }

    pub fn latest(&self) -> Option<(usize, &PrimalDualPoint<T>)> {
        self.entries.back().map(|(n, p)| (*n, p))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
