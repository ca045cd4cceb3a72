//! Discrete state lattice shared by the backward-induction solvers, plus
//! the risk/strategy table containers and their text export format.

use serde::Serialize;

use crate::model::{Arm, State};

/// Which recursion produced a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RecursionKind {
    /// Normalized risk R, recomputed against the posterior each step.
    V1,
    /// Unnormalized risk R~ = R * marginal, driven by predictive weights.
    V2,
    /// First-order small-step scheme for R~.
    Linearized,
}

impl RecursionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecursionKind::V1 => "v1",
            RecursionKind::V2 => "v2",
            RecursionKind::Linearized => "linearized",
        }
    }
}

/// A lattice point: per-arm step counts and event counts. Times are
/// recovered as t_l = n_l * dt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct LatticeState {
    pub n1: u32,
    pub x1: u32,
    pub n2: u32,
    pub x2: u32,
}

impl LatticeState {
    pub fn root() -> LatticeState {
        LatticeState { n1: 0, x1: 0, n2: 0, x2: 0 }
    }

    pub fn layer(&self) -> u32 {
        self.n1 + self.n2
    }

    pub fn to_state(&self, dt: f64) -> State {
        State {
            x1: self.x1,
            t1: f64::from(self.n1) * dt,
            x2: self.x2,
            t2: f64::from(self.n2) * dt,
        }
    }
}

/// Lattice dimensions: horizon T split into `steps` intervals, counts
/// truncated at `xmax` per arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableShape {
    pub horizon: f64,
    pub steps: u32,
    pub xmax: u32,
}

impl TableShape {
    pub fn dt(&self) -> f64 {
        self.horizon / f64::from(self.steps)
    }

    fn side(&self) -> usize {
        self.xmax as usize + 1
    }

    fn layer_len(&self, n: u32) -> usize {
        (n as usize + 1) * self.side() * self.side()
    }

    fn index(&self, s: LatticeState) -> usize {
        debug_assert!(s.x1 <= self.xmax && s.x2 <= self.xmax);
        (s.n1 as usize * self.side() + s.x1 as usize) * self.side() + s.x2 as usize
    }

    /// Valid lattice states in layer n = n1 + n2: counts bounded by xmax
    /// and zero wherever the corresponding time is zero.
    pub fn states_in_layer(&self, n: u32) -> impl Iterator<Item = LatticeState> + '_ {
        let xmax = self.xmax;
        (0..=n).flat_map(move |n1| {
            let n2 = n - n1;
            let x1_hi = if n1 == 0 { 0 } else { xmax };
            (0..=x1_hi).flat_map(move |x1| {
                let x2_hi = if n2 == 0 { 0 } else { xmax };
                (0..=x2_hi).map(move |x2| LatticeState { n1, x1, n2, x2 })
            })
        })
    }
}

/// Per-state risk values, layered by total step count.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable {
    shape: TableShape,
    kind: RecursionKind,
    layers: Vec<Vec<f64>>,
}

impl RiskTable {
    pub(crate) fn zeroed(shape: TableShape, kind: RecursionKind) -> RiskTable {
        let layers = (0..=shape.steps).map(|n| vec![0.0; shape.layer_len(n)]).collect();
        RiskTable { shape, kind, layers }
    }

    pub fn shape(&self) -> TableShape {
        self.shape
    }

    pub fn kind(&self) -> RecursionKind {
        self.kind
    }

    pub(crate) fn set_kind(&mut self, kind: RecursionKind) {
        self.kind = kind;
    }

    pub fn value(&self, s: LatticeState) -> f64 {
        self.layers[s.layer() as usize][self.shape.index(s)]
    }

    pub(crate) fn set(&mut self, s: LatticeState, v: f64) {
        let idx = self.shape.index(s);
        self.layers[s.layer() as usize][idx] = v;
    }

    /// Export format: header, then one `n1 x1 n2 x2 value` line per valid
    /// lattice state, sorted by (n1, x1, n2, x2).
    pub fn to_text(&self) -> String {
        let mut lines = Vec::new();
        for n in 0..=self.shape.steps {
            for s in self.shape.states_in_layer(n) {
                lines.push((s, self.value(s)));
            }
        }
        lines.sort_by_key(|(s, _)| (s.n1, s.x1, s.n2, s.x2));
        let mut out = format!(
            "# risk table version={} T={:.11e} N={} xmax={}\n# n1 x1 n2 x2 value\n",
            self.kind.as_str(),
            self.shape.horizon,
            self.shape.steps,
            self.shape.xmax
        );
        for (s, v) in lines {
            out.push_str(&format!("{} {} {} {} {:.11e}\n", s.n1, s.x1, s.n2, s.x2, v));
        }
        out
    }
}

/// Per-state chosen actions on the non-terminal layers. States whose
/// marginal likelihood vanishes carry no action.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyTable {
    shape: TableShape,
    layers: Vec<Vec<u8>>,
}

impl StrategyTable {
    pub(crate) fn empty(shape: TableShape) -> StrategyTable {
        let layers = (0..shape.steps).map(|n| vec![0u8; shape.layer_len(n)]).collect();
        StrategyTable { shape, layers }
    }

    pub fn shape(&self) -> TableShape {
        self.shape
    }

    pub fn action(&self, s: LatticeState) -> Option<Arm> {
        Arm::from_label(self.layers[s.layer() as usize][self.shape.index(s)])
    }

    pub(crate) fn set(&mut self, s: LatticeState, arm: Arm) {
        let idx = self.shape.index(s);
        self.layers[s.layer() as usize][idx] = arm.label();
    }

    /// Export format: header, then one `n1 x1 n2 x2 action` line per
    /// non-terminal state with a defined action, sorted.
    pub fn to_text(&self, kind: RecursionKind) -> String {
        let mut lines = Vec::new();
        for n in 0..self.shape.steps {
            for s in self.shape.states_in_layer(n) {
                if let Some(arm) = self.action(s) {
                    lines.push((s, arm.label()));
                }
            }
        }
        lines.sort_by_key(|(s, _)| (s.n1, s.x1, s.n2, s.x2));
        let mut out = format!(
            "# strategy table version={} T={:.11e} N={} xmax={}\n# n1 x1 n2 x2 action\n",
            kind.as_str(),
            self.shape.horizon,
            self.shape.steps,
            self.shape.xmax
        );
        for (s, a) in lines {
            out.push_str(&format!("{} {} {} {} {}\n", s.n1, s.x1, s.n2, s.x2, a));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_enumeration_respects_zero_time_constraint() {
        let shape = TableShape { horizon: 1.0, steps: 4, xmax: 2 };
        let states: Vec<_> = shape.states_in_layer(0).collect();
        assert_eq!(states, vec![LatticeState::root()]);
        for s in shape.states_in_layer(3) {
            assert_eq!(s.layer(), 3);
            if s.n1 == 0 {
                assert_eq!(s.x1, 0);
            }
            if s.n2 == 0 {
                assert_eq!(s.x2, 0);
            }
        }
        // layer 3: n1 in 0..=3; boundary splits have one clamped count.
        let count = shape.states_in_layer(3).count();
        assert_eq!(count, 3 + 9 + 9 + 3);
    }

    #[test]
    fn table_set_get_round_trip() {
        let shape = TableShape { horizon: 2.0, steps: 3, xmax: 4 };
        let mut table = RiskTable::zeroed(shape, RecursionKind::V1);
        let s = LatticeState { n1: 1, x1: 2, n2: 1, x2: 3 };
        table.set(s, 0.25);
        assert_eq!(table.value(s), 0.25);
        assert_eq!(table.value(LatticeState::root()), 0.0);
    }

    #[test]
    fn strategy_default_is_undefined() {
        let shape = TableShape { horizon: 1.0, steps: 2, xmax: 2 };
        let mut strat = StrategyTable::empty(shape);
        let s = LatticeState::root();
        assert_eq!(strat.action(s), None);
        strat.set(s, Arm::Two);
        assert_eq!(strat.action(s), Some(Arm::Two));
    }
}
