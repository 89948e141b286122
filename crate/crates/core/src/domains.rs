//! Benchmark problems: target classification with two aerial vehicles (MAV)
//! and information gathering with two rovers on a 2×2 grid.

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::model::{sparse_from_dense, FinalRewardSpec, JointSpace, Labels, Problem, RewardSpec};

/// Tunable MAV parameters. Defaults are illustrative choices with the intended
/// qualitative structure, not calibrated values.
#[derive(Debug, Clone, PartialEq)]
pub struct MavParams {
    pub stay_prob_friendly: f64,
    pub stay_prob_hostile: f64,
    /// Probability that the camera reports the true location, by distance 0..3.
    pub camera_accuracy: [f64; 4],
    /// Probability that the radar reports the true location, by distance 0..3.
    pub radar_accuracy: [f64; 4],
    /// Fraction of radar accuracy lost when both vehicles use radar.
    pub interference_penalty: f64,
}

impl Default for MavParams {
    fn default() -> Self {
        MavParams {
            stay_prob_friendly: 0.7,
            stay_prob_hostile: 0.3,
            camera_accuracy: [0.9, 0.7, 0.4, 0.3],
            radar_accuracy: [0.4, 0.6, 0.8, 0.9],
            interference_penalty: 0.5,
        }
    }
}

impl MavParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} = {v} is not in [0, 1]"
                )))
            }
        };
        unit("stay_prob_friendly", self.stay_prob_friendly)?;
        unit("stay_prob_hostile", self.stay_prob_hostile)?;
        unit("interference_penalty", self.interference_penalty)?;
        for (d, (&c, &r)) in self
            .camera_accuracy
            .iter()
            .zip(&self.radar_accuracy)
            .enumerate()
        {
            unit(&format!("camera_accuracy[{d}]"), c)?;
            unit(&format!("radar_accuracy[{d}]"), r)?;
        }
        Ok(())
    }
}

pub const MAV_CAMERA: usize = 0;
pub const MAV_RADAR: usize = 1;
const MAV_LOCATIONS: usize = 4;

/// Distance from each vehicle to the target at location `loc`: vehicle 0
/// faces `l0`, vehicle 1 faces `l3`.
pub fn mav_distance(agent: usize, loc: usize) -> usize {
    if agent == 0 {
        loc
    } else {
        MAV_LOCATIONS - 1 - loc
    }
}

/// Per-step cost of one vehicle's action with the target at `loc`.
pub fn mav_action_cost(agent: usize, action: usize, loc: usize) -> f64 {
    if action != MAV_RADAR {
        return 0.0;
    }
    0.1 + match mav_distance(agent, loc) {
        0 => 1.0,
        1 => 0.1,
        _ => 0.0,
    }
}

/// MAV problem. States are `type * 4 + location` with type 0 friendly and 1
/// hostile; the type never changes. Each vehicle picks camera or radar and
/// observes a location estimate. Step rewards are the negated sensing costs,
/// the final reward is the negative entropy of the joint belief.
pub fn build_mav(params: &MavParams, horizon: usize) -> Result<Problem> {
    params.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let n_s = 2 * MAV_LOCATIONS;
    let aspace = JointSpace::new(&[2, 2]);
    let zspace = JointSpace::new(&[MAV_LOCATIONS, MAV_LOCATIONS]);

    let motion = |stay: f64, loc: usize| -> Vec<f64> {
        let neighbours: Vec<usize> = [
            loc.checked_sub(1),
            (loc + 1 < MAV_LOCATIONS).then_some(loc + 1),
        ]
        .into_iter()
        .flatten()
        .collect();
        let mut row = vec![0.0; MAV_LOCATIONS];
        row[loc] = stay;
        for &n in &neighbours {
            row[n] += (1.0 - stay) / neighbours.len() as f64;
        }
        row
    };
    let transition_rows: Vec<Vec<(usize, f64)>> = (0..n_s)
        .map(|s| {
            let (kind, loc) = (s / MAV_LOCATIONS, s % MAV_LOCATIONS);
            let stay = if kind == 0 {
                params.stay_prob_friendly
            } else {
                params.stay_prob_hostile
            };
            let mut dense = vec![0.0; n_s];
            for (l, p) in motion(stay, loc).into_iter().enumerate() {
                dense[kind * MAV_LOCATIONS + l] = p;
            }
            sparse_from_dense(&dense)
        })
        .collect();
    let transition = vec![transition_rows; aspace.size()];

    let observation = (0..aspace.size())
        .map(|a| {
            let actions = aspace.decode(a);
            let both_radar = actions.iter().all(|&x| x == MAV_RADAR);
            (0..n_s)
                .map(|s| {
                    let loc = s % MAV_LOCATIONS;
                    let local: Vec<Vec<f64>> = (0..2)
                        .map(|i| {
                            let d = mav_distance(i, loc);
                            let mut acc = if actions[i] == MAV_RADAR {
                                params.radar_accuracy[d]
                            } else {
                                params.camera_accuracy[d]
                            };
                            if both_radar {
                                acc *= 1.0 - params.interference_penalty;
                            }
                            (0..MAV_LOCATIONS)
                                .map(|z| {
                                    if z == loc {
                                        acc
                                    } else {
                                        (1.0 - acc) / (MAV_LOCATIONS - 1) as f64
                                    }
                                })
                                .collect()
                        })
                        .collect();
                    let dense: Vec<f64> = (0..zspace.size())
                        .map(|z| {
                            local[0][zspace.component(z, 0)] * local[1][zspace.component(z, 1)]
                        })
                        .collect();
                    sparse_from_dense(&dense)
                })
                .collect()
        })
        .collect();

    let table: Vec<Vec<f64>> = (0..aspace.size())
        .map(|a| {
            let actions = aspace.decode(a);
            (0..n_s)
                .map(|s| {
                    let loc = s % MAV_LOCATIONS;
                    -(0..2)
                        .map(|i| mav_action_cost(i, actions[i], loc))
                        .sum::<f64>()
                })
                .collect()
        })
        .collect();

    let local_action_labels = vec!["camera".to_string(), "radar".to_string()];
    let labels = Labels {
        states: (0..n_s)
            .map(|s| {
                format!(
                    "{}-l{}",
                    if s < MAV_LOCATIONS {
                        "friendly"
                    } else {
                        "hostile"
                    },
                    s % MAV_LOCATIONS
                )
            })
            .collect(),
        actions: vec![local_action_labels; 2],
        observations: vec![(0..MAV_LOCATIONS).map(|l| format!("l{l}")).collect(); 2],
    };

    Ok(Problem {
        agent_count: 2,
        state_count: n_s,
        local_actions: vec![2, 2],
        local_observations: vec![MAV_LOCATIONS, MAV_LOCATIONS],
        transition,
        observation,
        initial_belief: Belief::uniform(n_s),
        horizon,
        step_rewards: vec![RewardSpec::LinearStateAction { table }; horizon],
        final_reward: FinalRewardSpec::NegEntropy,
        labels,
    })
}

pub const ROVER_NORTH: usize = 0;
pub const ROVER_SOUTH: usize = 1;
pub const ROVER_EAST: usize = 2;
pub const ROVER_WEST: usize = 3;
pub const ROVER_MEASURE: usize = 4;

const ROVER_SITES: usize = 4;
const ROVER_SINGLE_TRUE_POSITIVE: f64 = 0.8;
const ROVER_SINGLE_FALSE_POSITIVE: f64 = 0.2;
const ROVER_JOINT_TRUE_POSITIVE: f64 = 0.99;
const ROVER_JOINT_FALSE_POSITIVE: f64 = 0.05;
const ROVER_MOVE_SUCCESS: f64 = 0.8;
const ROVER_MEASURE_COST: f64 = 0.1;

/// Grid cell `(row, column)` of location `loc`: `l0` NW, `l1` SW, `l2` NE, `l3` SE.
pub fn rover_cell(loc: usize) -> (usize, usize) {
    (loc % 2, loc / 2)
}

fn rover_location(row: usize, col: usize) -> usize {
    col * 2 + row
}

/// Target location of a move, or `None` for moves off the grid and for
/// measuring.
pub fn rover_move_target(loc: usize, action: usize) -> Option<usize> {
    let (r, c) = rover_cell(loc);
    let (r2, c2) = match action {
        ROVER_NORTH => (r.checked_sub(1)?, c),
        ROVER_SOUTH => (r + 1, c),
        ROVER_EAST => (r, c + 1),
        ROVER_WEST => (r, c.checked_sub(1)?),
        _ => return None,
    };
    (r2 < 2 && c2 < 2).then(|| rover_location(r2, c2))
}

/// State index of rover locations and site bits (bit `j` set when site `j` is good).
pub fn rover_state(loc1: usize, loc2: usize, sites: usize) -> usize {
    (loc1 * 4 + loc2) * 16 + sites
}

/// Inverse of [`rover_state`].
pub fn rover_state_parts(s: usize) -> (usize, usize, usize) {
    (s / 64, (s / 16) % 4, s % 16)
}

/// Rovers problem with 256 states. Each rover moves or measures the site at its
/// location and observes `location * 2 + bit`, where the bit is the measurement
/// outcome and always 0 when not measuring. Two rovers measuring the same site
/// share one more reliable reading.
pub fn build_rovers(horizon: usize) -> Result<Problem> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let n_s = 16 * (1 << ROVER_SITES);
    let aspace = JointSpace::new(&[5, 5]);
    let zspace = JointSpace::new(&[8, 8]);

    let move_dist = |loc: usize, action: usize| -> Vec<(usize, f64)> {
        match rover_move_target(loc, action) {
            Some(dest) => vec![(loc, 1.0 - ROVER_MOVE_SUCCESS), (dest, ROVER_MOVE_SUCCESS)],
            None => vec![(loc, 1.0)],
        }
    };

    let mut transition = Vec::with_capacity(aspace.size());
    let mut observation = Vec::with_capacity(aspace.size());
    for a in 0..aspace.size() {
        let acts = aspace.decode(a);
        let rows = (0..n_s)
            .map(|s| {
                let (l1, l2, sites) = rover_state_parts(s);
                let mut dense = vec![0.0; n_s];
                for &(n1, p1) in &move_dist(l1, acts[0]) {
                    for &(n2, p2) in &move_dist(l2, acts[1]) {
                        dense[rover_state(n1, n2, sites)] += p1 * p2;
                    }
                }
                sparse_from_dense(&dense)
            })
            .collect();
        transition.push(rows);

        let rows = (0..n_s)
            .map(|s| {
                let (l1, l2, sites) = rover_state_parts(s);
                let good = |loc: usize| sites >> loc & 1 == 1;
                let measuring = [acts[0] == ROVER_MEASURE, acts[1] == ROVER_MEASURE];
                let mut dense = vec![0.0; zspace.size()];
                if measuring[0] && measuring[1] && l1 == l2 {
                    let p1 = if good(l1) {
                        ROVER_JOINT_TRUE_POSITIVE
                    } else {
                        ROVER_JOINT_FALSE_POSITIVE
                    };
                    for (bit, p) in [(0, 1.0 - p1), (1, p1)] {
                        dense[zspace.encode(&[l1 * 2 + bit, l2 * 2 + bit])] += p;
                    }
                } else {
                    let bit_dist = |measure: bool, loc: usize| -> [f64; 2] {
                        if !measure {
                            [1.0, 0.0]
                        } else if good(loc) {
                            [1.0 - ROVER_SINGLE_TRUE_POSITIVE, ROVER_SINGLE_TRUE_POSITIVE]
                        } else {
                            [
                                1.0 - ROVER_SINGLE_FALSE_POSITIVE,
                                ROVER_SINGLE_FALSE_POSITIVE,
                            ]
                        }
                    };
                    let d1 = bit_dist(measuring[0], l1);
                    let d2 = bit_dist(measuring[1], l2);
                    for b1 in 0..2 {
                        for b2 in 0..2 {
                            dense[zspace.encode(&[l1 * 2 + b1, l2 * 2 + b2])] += d1[b1] * d2[b2];
                        }
                    }
                }
                sparse_from_dense(&dense)
            })
            .collect();
        observation.push(rows);
    }

    let table: Vec<Vec<f64>> = (0..aspace.size())
        .map(|a| {
            let measuring = aspace
                .decode(a)
                .iter()
                .filter(|&&x| x == ROVER_MEASURE)
                .count();
            vec![-ROVER_MEASURE_COST * measuring as f64; n_s]
        })
        .collect();

    let mut b0 = vec![0.0; n_s];
    for sites in 0..16 {
        b0[rover_state(0, 3, sites)] = 1.0 / 16.0;
    }

    let local_actions: Vec<String> = ["north", "south", "east", "west", "measure"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let local_observations: Vec<String> = (0..8)
        .map(|z| {
            format!(
                "l{}-{}",
                z / 2,
                if z % 2 == 1 { "positive" } else { "negative" }
            )
        })
        .collect();
    let labels = Labels {
        states: Vec::new(),
        actions: vec![local_actions; 2],
        observations: vec![local_observations; 2],
    };

    Ok(Problem {
        agent_count: 2,
        state_count: n_s,
        local_actions: vec![5, 5],
        local_observations: vec![8, 8],
        transition,
        observation,
        initial_belief: Belief::from_vec(b0),
        horizon,
        step_rewards: vec![RewardSpec::LinearStateAction { table }; horizon],
        final_reward: FinalRewardSpec::NegEntropy,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::observation_split;

    #[test]
    fn mav_shape_and_validity() {
        let p = build_mav(&MavParams::default(), 2).unwrap();
        assert_eq!(p.state_count, 8);
        assert_eq!(p.local_actions, vec![2, 2]);
        assert_eq!(p.local_observations, vec![4, 4]);
        assert!(p.validate().is_empty(), "{}", p.validate());
    }

    #[test]
    fn mav_static_target_has_identity_motion() {
        let params = MavParams {
            stay_prob_friendly: 1.0,
            stay_prob_hostile: 1.0,
            ..MavParams::default()
        };
        let p = build_mav(&params, 1).unwrap();
        for rows in &p.transition {
            for (s, row) in rows.iter().enumerate() {
                assert_eq!(row, &vec![(s, 1.0)]);
            }
        }
    }

    #[test]
    fn mav_double_radar_cost_near_first_vehicle() {
        let p = build_mav(&MavParams::default(), 1).unwrap();
        let a = p.action_space().encode(&[MAV_RADAR, MAV_RADAR]);
        let RewardSpec::LinearStateAction { table } = &p.step_rewards[0] else {
            panic!()
        };
        // Friendly and hostile target at l0.
        assert!((table[a][0] - -1.2).abs() < 1e-12);
        assert!((table[a][4] - -1.2).abs() < 1e-12);
        let cam = p.action_space().encode(&[MAV_CAMERA, MAV_CAMERA]);
        assert!(table[cam].iter().all(|&r| r == 0.0));
    }

    #[test]
    fn mav_interference_halves_radar_accuracy() {
        let p = build_mav(&MavParams::default(), 1).unwrap();
        let z = p.observation_space();
        let rr = p.action_space().encode(&[MAV_RADAR, MAV_RADAR]);
        // Target at l3: vehicle 0 at distance 3 (0.9 → 0.45), vehicle 1 at 0 (0.4 → 0.2).
        let row = &p.observation[rr][3];
        let prob = |z0, z1| {
            row.iter()
                .find(|&&(zz, _)| zz == z.encode(&[z0, z1]))
                .map_or(0.0, |&(_, p)| p)
        };
        assert!((prob(3, 3) - 0.45 * 0.2).abs() < 1e-12);
        assert!((prob(0, 3) - 0.55 / 3.0 * 0.2).abs() < 1e-12);
    }

    #[test]
    fn rovers_shape_and_validity() {
        let p = build_rovers(2).unwrap();
        assert_eq!(p.state_count, 256);
        assert_eq!(p.local_actions, vec![5, 5]);
        assert_eq!(p.local_observations, vec![8, 8]);
        assert!(p.validate().is_empty(), "{}", p.validate());
        assert_eq!(p.final_reward.evaluate(p.initial_belief.as_slice()), -4.0);
    }

    #[test]
    fn rover_grid_layout() {
        assert_eq!(rover_move_target(0, ROVER_EAST), Some(2));
        assert_eq!(rover_move_target(0, ROVER_SOUTH), Some(1));
        assert_eq!(rover_move_target(0, ROVER_NORTH), None);
        assert_eq!(rover_move_target(3, ROVER_WEST), Some(1));
        assert_eq!(rover_move_target(3, ROVER_NORTH), Some(2));
        assert_eq!(rover_move_target(3, ROVER_EAST), None);
    }

    #[test]
    fn rovers_shared_reading_at_same_site() {
        let p = build_rovers(1).unwrap();
        let a = p.action_space().encode(&[ROVER_MEASURE, ROVER_MEASURE]);
        let s = rover_state(0, 0, 0b0001);
        let z = p.observation_space().encode(&[1, 1]);
        let row = &p.observation[a][s];
        assert_eq!(row.iter().find(|e| e.0 == z).unwrap().1, 0.99);
        assert_eq!(row.len(), 2);
    }

    #[test]
    fn rovers_own_location_is_observed() {
        let p = build_rovers(1).unwrap();
        let zspace = p.observation_space();
        for rows in &p.observation {
            for (s, row) in rows.iter().enumerate() {
                let (l1, l2, _) = rover_state_parts(s);
                for &(z, _) in row {
                    assert_eq!(zspace.component(z, 0) / 2, l1);
                    assert_eq!(zspace.component(z, 1) / 2, l2);
                }
            }
        }
    }

    #[test]
    fn rovers_site_marginals_are_martingales() {
        let p = build_rovers(1).unwrap();
        let marginal = |b: &[f64], site: usize| -> f64 {
            b.iter()
                .enumerate()
                .filter(|(s, _)| rover_state_parts(*s).2 >> site & 1 == 1)
                .map(|(_, p)| p)
                .sum()
        };
        for a in 0..p.joint_action_count() {
            let split = observation_split(&p, p.initial_belief.as_slice(), a);
            for site in 0..4 {
                let mean: f64 = split
                    .iter()
                    .map(|br| br.prob * marginal(br.posterior.as_slice(), site))
                    .sum();
                assert!((mean - 0.5).abs() < 1e-12);
            }
        }
    }
}
