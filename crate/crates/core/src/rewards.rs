//! Per-step rewards for the two heads: `R_acc` (speed keeping plus
//! acceleration indecision) and `R_sa` (localization plus steering
//! indecision), each with its terminal signal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_env::TerminalState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub zeta: f64,
    pub phi: f64,
    pub chi: f64,
    pub psi: f64,
    pub lambda: f64,
    /// m/s²
    pub delta_acc: f64,
    /// rad
    pub delta_sa: f64,
    /// Negate the speed term above the limit instead of rewarding it.
    pub penalize_overspeed: bool,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            zeta: 0.009,
            phi: 0.05,
            chi: 0.05,
            psi: 0.1,
            lambda: 0.01,
            delta_acc: 0.5,
            delta_sa: 0.05,
            penalize_overspeed: false,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.zeta, self.phi, self.chi, self.psi, self.lambda, self.delta_acc, self.delta_sa];
        if w.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("reward weights must be strictly positive".into()))
        }
    }
}

/// What one step of the episode looked like, for reward purposes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionContext {
    /// Current speed over target speed.
    pub sr: f64,
    /// Agent heading minus path heading, rad.
    pub h_err: f64,
    /// Signed lateral offset, m.
    pub d: f64,
    /// |acc(t) - acc(t-1)| of the commanded actions.
    pub delta_acc_step: f64,
    /// |sa(t) - sa(t-1)| of the commanded actions.
    pub delta_sa_step: f64,
    pub terminal: TerminalState,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardPair {
    pub r_acc: f64,
    pub r_sa: f64,
}

impl RewardPair {
    pub fn new(r_acc: f64, r_sa: f64) -> Self {
        Self { r_acc, r_sa }
    }
}

impl std::ops::Add for RewardPair {
    type Output = RewardPair;
    fn add(self, o: RewardPair) -> RewardPair {
        RewardPair::new(self.r_acc + o.r_acc, self.r_sa + o.r_sa)
    }
}

impl std::ops::AddAssign for RewardPair {
    fn add_assign(&mut self, o: RewardPair) {
        *self = *self + o;
    }
}

/// `sr * zeta` below the limit, `(sr - 1) * zeta` at or above it.
pub fn r_speed(sr: f64, w: &RewardWeights) -> f64 {
    if sr < 1.0 {
        sr * w.zeta
    } else if w.penalize_overspeed {
        -(sr - 1.0) * w.zeta
    } else {
        (sr - 1.0) * w.zeta
    }
}

pub fn r_localization(h_err: f64, d: f64, w: &RewardWeights) -> f64 {
    -(w.phi * h_err.abs() + w.chi * d.abs())
}

pub fn r_indecision(delta_step: f64, threshold: f64, coeff: f64) -> f64 {
    coeff * (threshold - delta_step).min(0.0)
}

pub fn terminal_reward(terminal: TerminalState) -> RewardPair {
    match terminal {
        TerminalState::GoalReached => RewardPair::new(1.0, 1.0),
        TerminalState::OffRoad => RewardPair::new(0.0, -1.0),
        TerminalState::TimeOver => RewardPair::new(-1.0, 0.0),
        TerminalState::None => RewardPair::new(0.0, 0.0),
    }
}

pub fn compute_rewards(ctx: &TransitionContext, w: &RewardWeights) -> RewardPair {
    let term = terminal_reward(ctx.terminal);
    RewardPair {
        r_acc: r_speed(ctx.sr, w) + r_indecision(ctx.delta_acc_step, w.delta_acc, w.psi) + term.r_acc,
        r_sa: r_localization(ctx.h_err, ctx.d, w) + r_indecision(ctx.delta_sa_step, w.delta_sa, w.lambda) + term.r_sa,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    fn ctx(sr: f64, h_err: f64, d: f64, da: f64, ds: f64, terminal: TerminalState) -> TransitionContext {
        TransitionContext {
            sr,
            h_err,
            d,
            delta_acc_step: da,
            delta_sa_step: ds,
            terminal,
        }
    }

    #[test]
    fn defaults_are_valid() {
        let w = RewardWeights::default();
        w.validate().unwrap();
        assert_eq!((w.zeta, w.phi, w.chi, w.psi, w.lambda), (0.009, 0.05, 0.05, 0.1, 0.01));
        assert_eq!((w.delta_acc, w.delta_sa), (0.5, 0.05));
        let bad = RewardWeights { psi: 0.0, ..w };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn speed_examples() {
        let w = RewardWeights::default();
        assert_eq!(r_speed(1.0, &w), 0.0);
        assert!((r_speed(0.5, &w) - 0.0045).abs() < EPS);
        assert!((r_speed(1.5, &w) - 0.0045).abs() < EPS);
        let p = RewardWeights {
            penalize_overspeed: true,
            ..w
        };
        assert!((r_speed(1.5, &p) + 0.0045).abs() < EPS);
        assert!((r_speed(0.5, &p) - 0.0045).abs() < EPS);
    }

    #[test]
    fn speed_piecewise_slope() {
        // value 0 at sr = 1 and slope zeta on both branches; the lower branch
        // tends to zeta, not 0, as sr -> 1
        let w = RewardWeights::default();
        let h = 1e-3;
        assert!(((r_speed(0.8 + h, &w) - r_speed(0.8, &w)) / h - w.zeta).abs() < 1e-9);
        assert!(((r_speed(1.2 + h, &w) - r_speed(1.2, &w)) / h - w.zeta).abs() < 1e-9);
        assert!((r_speed(1.0 - 1e-9, &w) - w.zeta).abs() < 1e-10);
    }

    #[test]
    fn localization_examples() {
        let w = RewardWeights::default();
        assert_eq!(r_localization(0.0, 0.0, &w), 0.0);
        assert!((r_localization(0.1, 0.5, &w) + 0.03).abs() < EPS);
        assert!((r_localization(-0.1, 0.5, &w) + 0.03).abs() < EPS);
    }

    #[test]
    fn indecision_examples() {
        assert_eq!(r_indecision(0.3, 0.5, 0.1), 0.0);
        assert!((r_indecision(0.7, 0.5, 0.1) + 0.02).abs() < EPS);
        assert!((r_indecision(0.1, 0.05, 0.01) + 0.0005).abs() < EPS);
    }

    #[test]
    fn terminal_examples() {
        assert_eq!(terminal_reward(TerminalState::GoalReached), RewardPair::new(1.0, 1.0));
        assert_eq!(terminal_reward(TerminalState::OffRoad), RewardPair::new(0.0, -1.0));
        assert_eq!(terminal_reward(TerminalState::TimeOver), RewardPair::new(-1.0, 0.0));
        assert_eq!(terminal_reward(TerminalState::None), RewardPair::new(0.0, 0.0));
    }

    #[test]
    fn compute_examples() {
        let w = RewardWeights::default();
        let r = compute_rewards(&ctx(1.0, 0.0, 0.0, 0.0, 0.0, TerminalState::None), &w);
        assert_eq!(r, RewardPair::new(0.0, 0.0));
        let r = compute_rewards(&ctx(0.5, 0.1, 0.5, 0.7, 0.1, TerminalState::None), &w);
        assert!((r.r_acc + 0.0155).abs() < EPS, "{r:?}");
        assert!((r.r_sa + 0.0305).abs() < EPS, "{r:?}");
        let g = compute_rewards(&ctx(0.5, 0.1, 0.5, 0.7, 0.1, TerminalState::GoalReached), &w);
        assert!((g.r_acc - (r.r_acc + 1.0)).abs() < EPS);
        assert!((g.r_sa - (r.r_sa + 1.0)).abs() < EPS);
    }

    fn terminal() -> impl Strategy<Value = TerminalState> {
        prop_oneof![
            Just(TerminalState::None),
            Just(TerminalState::GoalReached),
            Just(TerminalState::OffRoad),
            Just(TerminalState::TimeOver),
        ]
    }

    proptest! {
        #[test]
        fn indecision_nonpositive(delta in 0.0f64..10.0, thr in 0.001f64..5.0, coeff in 0.001f64..1.0) {
            let r = r_indecision(delta, thr, coeff);
            prop_assert!(r <= 0.0);
            prop_assert_eq!(r == 0.0, delta <= thr);
        }

        #[test]
        fn additivity(sr in 0.0f64..3.0, h in -3.2f64..3.2, d in -10.0f64..10.0,
                      da in 0.0f64..4.0, ds in 0.0f64..0.4, t in terminal()) {
            let w = RewardWeights::default();
            let r = compute_rewards(&ctx(sr, h, d, da, ds, t), &w);
            // independent evaluation of each term
            let speed = if sr < 1.0 { sr * 0.009 } else { (sr - 1.0) * 0.009 };
            let acc_ind = if da > 0.5 { 0.1 * (0.5 - da) } else { 0.0 };
            let loc = -(0.05 * h.abs() + 0.05 * d.abs());
            let sa_ind = if ds > 0.05 { 0.01 * (0.05 - ds) } else { 0.0 };
            let (ta, ts) = match t {
                TerminalState::GoalReached => (1.0, 1.0),
                TerminalState::OffRoad => (0.0, -1.0),
                TerminalState::TimeOver => (-1.0, 0.0),
                TerminalState::None => (0.0, 0.0),
            };
            prop_assert!((r.r_acc - (speed + acc_ind + ta)).abs() < 1e-12);
            prop_assert!((r.r_sa - (loc + sa_ind + ts)).abs() < 1e-12);
        }

        #[test]
        fn step_rewards_below_terminal_magnitude(sr in 0.0f64..1.0, h in -std::f64::consts::PI..std::f64::consts::PI,
                                                  d in -10.0f64..10.0, da in 0.0f64..4.0, ds in 0.0f64..0.4) {
            // sr bounded by the speed range: at most 12 m/s over a 4 m/s limit
            let w = RewardWeights::default();
            for s in [sr, 1.0 + 2.0 * sr] {
                let r = compute_rewards(&ctx(s, h, d, da, ds, TerminalState::None), &w);
                prop_assert!(r.r_acc.abs() < 1.0 && r.r_sa.abs() < 1.0, "{:?}", r);
            }
        }
    }
}
