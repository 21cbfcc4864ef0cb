//! Internal longevity-insurance market.
//!
//! At the end of a period the funds of members who died are pooled and
//! shared among survivors in proportion to `(1 - p) v`, their expected
//! contribution to the pool, where `p` is the survival probability over the
//! period and `v` the end-of-period fund value. Because the weights use
//! end-of-period values, members with different investment strategies can
//! share one pool.

use alloc::vec::Vec;

use crate::math;
use crate::rng::Stream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolMember {
    pub scheme_id: u32,
    pub member_id: u64,
    /// Probability of surviving the period.
    pub survive_prob: f64,
    /// End-of-period fund value.
    pub fund_value: f64,
    pub died: bool,
}

impl PoolMember {
    pub fn new(member_id: u64, survive_prob: f64, fund_value: f64, died: bool) -> Self {
        Self {
            scheme_id: 0,
            member_id,
            survive_prob,
            fund_value,
            died,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settlement {
    /// Total value released by deaths, `F`.
    pub pool_total: f64,
    /// Credit per member, in input order.
    pub credits: Vec<f64>,
    /// Part of `F` that could not be distributed because no survivor carried
    /// positive weight. The caller decides what happens to it.
    pub undistributed: f64,
    /// Value of dead members' funds kept out of the pool by a cap, in input
    /// order. All zero for an uncapped settlement.
    pub retained: Vec<f64>,
}

impl Settlement {
    pub fn is_undistributable(&self) -> bool {
        self.undistributed > 0.0
    }

    pub fn distributed(&self) -> f64 {
        math::pairwise_sum(&self.credits)
    }

    pub fn credit_of(&self, members: &[PoolMember], member_id: u64) -> Option<f64> {
        members
            .iter()
            .position(|m| m.member_id == member_id)
            .map(|i| self.credits[i])
    }
}

fn validate(members: &[PoolMember]) -> Result<()> {
    if members.is_empty() {
        return Err(Error::InvalidParameter {
            field: "members",
            reason: "pool must have at least one member",
        });
    }
    for m in members {
        if !(m.fund_value >= 0.0) || !m.fund_value.is_finite() {
            return Err(Error::InvalidParameter {
                field: "fund_value",
                reason: "must be finite and non-negative",
            });
        }
        if !(0.0..=1.0).contains(&m.survive_prob) {
            return Err(Error::InvalidParameter {
                field: "survive_prob",
                reason: "must lie in [0, 1]",
            });
        }
    }
    Ok(())
}

fn settle_values(members: &[PoolMember], pooled: &[f64], retained: Vec<f64>) -> Settlement {
    let pool_total = math::pairwise_sum_by(members.len(), |i| {
        if members[i].died {
            pooled[i]
        } else {
            0.0
        }
    });
    let weight = |i: usize| {
        let m = &members[i];
        if m.died {
            0.0
        } else {
            (1.0 - m.survive_prob) * pooled[i]
        }
    };
    let total_weight = math::pairwise_sum_by(members.len(), weight);
    let (credits, undistributed) = if total_weight > 0.0 {
        let scale = pool_total / total_weight;
        ((0..members.len()).map(|i| weight(i) * scale).collect(), 0.0)
    } else {
        (alloc::vec![0.0; members.len()], pool_total)
    };
    Settlement {
        pool_total,
        credits,
        undistributed,
        retained,
    }
}

/// Settles one period: `F = sum D v`, and survivor `i` receives
/// `F (1 - p_i) v_i / sum_j (1 - D_j)(1 - p_j) v_j`.
pub fn settle(members: &[PoolMember]) -> Result<Settlement> {
    validate(members)?;
    let pooled: Vec<f64> = members.iter().map(|m| m.fund_value).collect();
    Ok(settle_values(members, &pooled, alloc::vec![0.0; members.len()]))
}

/// Settlement with participation capped so that `(1 - p) v_pooled <= cap`.
/// The part of a dead member's fund above the cap is reported in
/// `retained` rather than pooled.
pub fn settle_capped(members: &[PoolMember], cap: f64) -> Result<Settlement> {
    validate(members)?;
    if !(cap > 0.0) {
        return Err(Error::InvalidParameter {
            field: "cap",
            reason: "must be positive",
        });
    }
    let pooled: Vec<f64> = members
        .iter()
        .map(|m| {
            let death = 1.0 - m.survive_prob;
            if death > 0.0 {
                m.fund_value.min(cap / death)
            } else {
                m.fund_value
            }
        })
        .collect();
    let retained = members
        .iter()
        .zip(&pooled)
        .map(|(m, p)| if m.died { m.fund_value - p } else { 0.0 })
        .collect();
    Ok(settle_values(members, &pooled, retained))
}

/// A sequence of capped pools used in order: the first pool takes each
/// member up to `caps[0]`, the next takes the following slice up to
/// `caps[1]`, and so on. `caps` must be increasing. Value above the last cap
/// is retained.
pub fn settle_tiered(members: &[PoolMember], caps: &[f64]) -> Result<Vec<Settlement>> {
    validate(members)?;
    if caps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            field: "caps",
            reason: "must be strictly increasing",
        });
    }
    let mut remaining: Vec<PoolMember> = members.to_vec();
    let mut previous = 0.0;
    let mut out = Vec::with_capacity(caps.len());
    for &cap in caps {
        let layer = cap - previous;
        let s = settle_capped(&remaining, layer)?;
        for (m, r) in remaining.iter_mut().zip(members) {
            let death = 1.0 - r.survive_prob;
            let taken = if death > 0.0 {
                m.fund_value.min(layer / death)
            } else {
                m.fund_value
            };
            m.fund_value -= taken;
        }
        out.push(s);
        previous = cap;
    }
    Ok(out)
}

/// Draws deaths independently with probability `1 - survive_prob` (the
/// `died` flags of the input are ignored) and settles.
pub fn simulate_period(members: &[PoolMember], rng: &mut Stream) -> Result<(Vec<PoolMember>, Settlement)> {
    validate(members)?;
    let drawn: Vec<PoolMember> = members
        .iter()
        .map(|m| PoolMember {
            died: rng.bernoulli(1.0 - m.survive_prob),
            ..*m
        })
        .collect();
    let s = settle(&drawn)?;
    Ok((drawn, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Domain;
    use proptest::prelude::*;

    fn m(id: u64, p: f64, v: f64, died: bool) -> PoolMember {
        PoolMember::new(id, p, v, died)
    }

    #[test]
    fn sole_survivor_takes_all() {
        let s = settle(&[m(1, 0.9, 100.0, false), m(2, 0.8, 50.0, true)]).unwrap();
        assert_eq!(s.pool_total, 50.0);
        assert!((s.credits[0] - 50.0).abs() < 1e-12);
        assert_eq!(s.credits[1], 0.0);
    }

    #[test]
    fn nobody_dies() {
        let s = settle(&[m(1, 0.9, 100.0, false), m(2, 0.8, 50.0, false)]).unwrap();
        assert_eq!(s.pool_total, 0.0);
        assert!(s.credits.iter().all(|&c| c == 0.0));
        assert!(!s.is_undistributable());
    }

    #[test]
    fn three_member_hand_example() {
        let members = [
            m(1, 0.9, 100.0, false),
            m(2, 0.8, 200.0, false),
            m(3, 0.7, 300.0, true),
        ];
        let s = settle(&members).unwrap();
        assert_eq!(s.pool_total, 300.0);
        assert!((s.credits[0] - 60.0).abs() < 1e-12);
        assert!((s.credits[1] - 240.0).abs() < 1e-12);
        assert_eq!(s.credits[2], 0.0);
        assert_eq!(s.credit_of(&members, 2), Some(s.credits[1]));
    }

    #[test]
    fn undistributable_pool_is_reported() {
        let s = settle(&[m(1, 1.0, 10.0, false), m(2, 0.5, 7.0, true)]).unwrap();
        assert!(s.is_undistributable());
        assert_eq!(s.undistributed, 7.0);
        assert!(s.credits.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn rejects_invalid_members() {
        assert!(settle(&[]).is_err());
        assert!(settle(&[m(1, 1.5, 1.0, false)]).is_err());
        assert!(settle(&[m(1, 0.5, -1.0, false)]).is_err());
        assert!(settle_capped(&[m(1, 0.5, 1.0, false)], 0.0).is_err());
    }

    #[test]
    fn simulate_period_extremes() {
        let mut rng = Stream::new(3, Domain::Deaths, 0);
        let everyone_lives: Vec<_> = (0..50).map(|i| m(i, 1.0, 1.0, false)).collect();
        for _ in 0..20 {
            let (drawn, s) = simulate_period(&everyone_lives, &mut rng).unwrap();
            assert!(drawn.iter().all(|d| !d.died));
            assert!(s.credits.iter().all(|&c| c == 0.0));
        }
        let everyone_dies: Vec<_> = (0..50).map(|i| m(i, 0.0, 2.0, false)).collect();
        let (_, s) = simulate_period(&everyone_dies, &mut rng).unwrap();
        assert_eq!(s.undistributed, 100.0);
    }

    #[test]
    fn homogeneous_pool_converges_to_hazard_credit() {
        // mean survivor credit per unit fund -> (1 - p) / p with p the survival probability
        let members: Vec<_> = (0..10_000).map(|i| m(i, 0.9, 1.0, false)).collect();
        let reps = 200;
        let mut rng = Stream::new(5, Domain::Deaths, 1);
        let mut means = Vec::new();
        for _ in 0..reps {
            let (drawn, s) = simulate_period(&members, &mut rng).unwrap();
            let survivors = drawn.iter().filter(|d| !d.died).count() as f64;
            means.push(s.distributed() / survivors);
        }
        let mean = means.iter().sum::<f64>() / reps as f64;
        let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        let target = 0.1 / 0.9;
        assert!((mean - target).abs() < 3.0 * se, "{mean} vs {target}, se {se}");
    }

    #[test]
    fn cap_examples() {
        let members = [m(1, 0.9, 50.0, false), m(2, 0.5, 100.0, true), m(3, 0.8, 40.0, false)];
        // non-binding cap
        let a = settle(&members).unwrap();
        let b = settle_capped(&members, 1e9).unwrap();
        assert_eq!(a.credits, b.credits);
        assert_eq!(a.pool_total, b.pool_total);

        // (1 - p) v = (5, 50): member 2 limited to 10 / 0.5 = 20
        let two = [m(1, 0.9, 50.0, false), m(2, 0.5, 100.0, true)];
        let s = settle_capped(&two, 10.0).unwrap();
        assert!((s.pool_total - 20.0).abs() < 1e-12);
        assert!((s.retained[1] - 80.0).abs() < 1e-12);
        assert!((s.credits[0] - 20.0).abs() < 1e-12);

        let tiny = settle_capped(&members, 1e-300).unwrap();
        assert!(tiny.credits.iter().all(|&c| c < 1e-290));
    }

    #[test]
    fn tiered_pools_cover_capped_value() {
        let members = [m(1, 0.9, 500.0, false), m(2, 0.5, 100.0, true), m(3, 0.8, 40.0, false)];
        let tiers = settle_tiered(&members, &[5.0, 20.0, 1e9]).unwrap();
        let pooled: f64 = tiers.iter().map(|s| s.pool_total).sum();
        assert!((pooled - 100.0).abs() < 1e-12);
        let first = settle_capped(&members, 5.0).unwrap();
        assert_eq!(tiers[0], first);
        assert!(settle_tiered(&members, &[5.0, 5.0]).is_err());
    }

    fn member_strategy() -> impl Strategy<Value = PoolMember> {
        (0.0f64..=1.0, 0.0f64..1e6, any::<bool>(), 0u32..4)
            .prop_map(|(p, v, d, s)| PoolMember { scheme_id: s, member_id: 0, survive_prob: p, fund_value: v, died: d })
    }

    proptest! {
        #[test]
        fn conservation(members in proptest::collection::vec(member_strategy(), 1..60)) {
            let s = settle(&members).unwrap();
            let total = s.distributed() + s.undistributed;
            prop_assert!((total - s.pool_total).abs() <= 1e-12 * s.pool_total.max(1.0));
            for (c, mm) in s.credits.iter().zip(&members) {
                prop_assert!(*c >= 0.0);
                if mm.died { prop_assert_eq!(*c, 0.0); }
            }
        }

        #[test]
        fn scale_equivariance(members in proptest::collection::vec(member_strategy(), 1..40), lambda in 1e-3f64..1e3) {
            let s = settle(&members).unwrap();
            let scaled: Vec<_> = members.iter().map(|m| PoolMember { fund_value: m.fund_value * lambda, ..*m }).collect();
            let t = settle(&scaled).unwrap();
            for (a, b) in s.credits.iter().zip(&t.credits) {
                prop_assert!((a * lambda - b).abs() <= 1e-9 * b.abs().max(1e-9));
            }
        }

        #[test]
        fn scheme_ids_are_bookkeeping(members in proptest::collection::vec(member_strategy(), 1..40)) {
            let s = settle(&members).unwrap();
            let relabelled: Vec<_> = members.iter().enumerate().map(|(i, m)| PoolMember { scheme_id: i as u32 % 7, member_id: i as u64, ..*m }).collect();
            let t = settle(&relabelled).unwrap();
            prop_assert_eq!(s, t);
        }
    }
}
