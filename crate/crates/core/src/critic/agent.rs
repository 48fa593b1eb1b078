//! Decision making with a trained critic: score solver candidates, pick the best, and run
//! that policy over a scenario.

use serde::{Deserialize, Serialize};

use super::features::{reward, FeatureEncoder};
use super::network::CriticNetwork;
use crate::compute::{ComputeModel, ServiceProfile};
use crate::error::{Error, Result};
use crate::metrics::{RunTrace, TraceStep};
use crate::scenario::{EdgeNode, StateObservation};
use crate::solver::{Candidate, PlacementMatrix, PlacementProblem, SolverOptions};

#[derive(Debug, Clone, Copy)]
pub struct Agent<'a> {
    pub network: &'a CriticNetwork,
    pub encoder: &'a FeatureEncoder,
}

impl Agent<'_> {
    /// Q of one candidate. The reward slot carries the candidate's predicted delay.
    pub fn score(
        &self,
        state: &[f64],
        obs: &StateObservation,
        placement: &PlacementMatrix,
        nodes: &[EdgeNode],
        model: &ComputeModel,
    ) -> Result<f64> {
        let predicted = reward(obs, placement, nodes, model)?;
        Ok(self
            .network
            .q_value(state, &self.encoder.encode_action(placement), predicted))
    }

    pub fn scores(
        &self,
        state: &[f64],
        obs: &StateObservation,
        candidates: &[Candidate],
        nodes: &[EdgeNode],
        model: &ComputeModel,
    ) -> Result<Vec<f64>> {
        candidates
            .iter()
            .map(|c| self.score(state, obs, &c.placement, nodes, model))
            .collect()
    }

    /// Index of the highest-Q candidate; ties go to the better-ranked one.
    pub fn best_index(
        &self,
        state: &[f64],
        obs: &StateObservation,
        candidates: &[Candidate],
        nodes: &[EdgeNode],
        model: &ComputeModel,
    ) -> Result<usize> {
        if candidates.is_empty() {
            return Err(Error::Domain("no candidate placements to decide between".into()));
        }
        let qs = self.scores(state, obs, candidates, nodes, model)?;
        Ok(argmax(&qs))
    }

    pub fn decide(
        &self,
        obs: &StateObservation,
        candidates: &[Candidate],
        nodes: &[EdgeNode],
        model: &ComputeModel,
    ) -> Result<PlacementMatrix> {
        let state = self.encoder.encode_state(obs);
        let i = self.best_index(&state, obs, candidates, nodes, model)?;
        Ok(candidates[i].placement.clone())
    }
}

fn argmax(qs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &q) in qs.iter().enumerate().skip(1) {
        if q > qs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecisionPolicy {
    /// Highest Q among the solver's candidates.
    Argmax,
    /// Also offer the incumbent placement when it is within the solver's optimality gap,
    /// and among candidates whose Q is within `q_margin` of the best prefer the one that
    /// moves the fewest services.
    Sticky { q_margin: f64 },
}

impl Default for DecisionPolicy {
    fn default() -> Self {
        DecisionPolicy::Sticky { q_margin: 0.02 }
    }
}

/// The previous placement carried over to the current demand: services that were placed
/// keep their node, newly demanded ones take the optimum's node.
fn incumbent(problem: &PlacementProblem<'_>, previous: &PlacementMatrix, optimal: &PlacementMatrix) -> Option<Vec<Option<usize>>> {
    let mut assignment = vec![None; optimal.service_count()];
    let mut kept = 0;
    for &s in problem.placed_services() {
        assignment[s] = match previous.node_of(s) {
            Some(e) => {
                kept += 1;
                Some(e)
            }
            None => optimal.node_of(s),
        };
    }
    (kept > 0).then_some(assignment)
}

/// Run the critic-guided policy over every tick of a scenario.
pub fn run_drld(
    agent: &Agent<'_>,
    observations: &[StateObservation],
    nodes: &[EdgeNode],
    profiles: &[ServiceProfile],
    model: &ComputeModel,
    options: &SolverOptions,
    policy: DecisionPolicy,
) -> Result<RunTrace> {
    let mut trace = RunTrace::default();
    let mut previous: Option<PlacementMatrix> = None;
    for obs in observations {
        if obs.is_empty() {
            let placement = PlacementMatrix::empty(profiles.len());
            trace
                .steps
                .push(TraceStep::record(obs, placement, false, true, nodes, profiles, model)?);
            continue;
        }
        let problem = PlacementProblem::new(obs, nodes, profiles, model, options)?;
        let report = problem.solve(options.epsilon, options.max_candidates, options.strategy);
        let mut candidates = report.candidates;

        if let (DecisionPolicy::Sticky { .. }, Some(prev)) = (policy, &previous) {
            if let Some(assignment) = incumbent(&problem, prev, &report.optimal) {
                let objective = problem.objective_of(&assignment);
                let within = objective.value <= (1.0 + options.epsilon) * report.objective.value + 1e-12;
                let known = candidates.iter().any(|c| c.placement.assignment == assignment);
                if report.feasible && within && !known && problem.violations(&assignment).is_empty() {
                    candidates.push(Candidate {
                        placement: PlacementMatrix {
                            assignment,
                            instances: problem.instances().to_vec(),
                        },
                        objective,
                    });
                }
            }
        }

        let state = agent.encoder.encode_state(obs);
        let qs = agent.scores(&state, obs, &candidates, nodes, model)?;
        let chosen = match (policy, &previous) {
            (DecisionPolicy::Sticky { q_margin }, Some(prev)) => {
                let q_best = qs[argmax(&qs)];
                (0..candidates.len())
                    .filter(|&i| qs[i] >= q_best - q_margin)
                    .min_by_key(|&i| (candidates[i].placement.migrations_from(prev), i))
                    .expect("the best candidate is always within the margin")
            }
            _ => argmax(&qs),
        };
        let placement = candidates.swap_remove(chosen).placement;
        let feasible = problem.violations(&placement.assignment).is_empty();
        previous = Some(placement.clone());
        trace
            .steps
            .push(TraceStep::record(obs, placement, true, feasible, nodes, profiles, model)?);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compute::ComputeConfig;
    use crate::scenario::{Area, Point};
    use crate::solver::PlacementObjective;

    fn candidate(node: usize) -> Candidate {
        Candidate {
            placement: PlacementMatrix {
                assignment: vec![Some(node)],
                instances: vec![1],
            },
            objective: PlacementObjective {
                value: 0.0,
                resource_term: 0.0,
                delay_term: 0.0,
                alpha: 0.5,
            },
        }
    }

    fn fixture() -> (FeatureEncoder, Vec<EdgeNode>, ComputeModel, StateObservation) {
        let area = Area::default();
        let nodes: Vec<EdgeNode> = (0..3)
            .map(|id| EdgeNode {
                id,
                position: Point::new(100.0 + 500.0 * id as f64, 100.0),
                capacity: 100,
            })
            .collect();
        let model = ComputeModel::new(ComputeConfig::default(), area).unwrap();
        let obs = StateObservation::from_requests(
            1,
            1,
            &[crate::scenario::ServiceRequest {
                vehicle: 0,
                location: Point::new(100.0, 100.0),
                time: 1,
                service: 0,
            }],
        );
        (FeatureEncoder::new(1, 3, 10, area), nodes, model, obs)
    }

    #[test]
    fn single_candidate_is_returned() {
        let (enc, nodes, model, obs) = fixture();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        let net = CriticNetwork::random(&CriticNetwork::default_sizes(enc.input_dim()), &mut rng);
        let agent = Agent {
            network: &net,
            encoder: &enc,
        };
        let p = agent.decide(&obs, &[candidate(2)], &nodes, &model).unwrap();
        assert_eq!(p.node_of(0), Some(2));
    }

    #[test]
    fn zero_network_keeps_solver_order() {
        let (enc, nodes, model, obs) = fixture();
        let net = CriticNetwork::zeros(&CriticNetwork::default_sizes(enc.input_dim()));
        let agent = Agent {
            network: &net,
            encoder: &enc,
        };
        let cands = [candidate(1), candidate(0), candidate(2)];
        assert_eq!(agent.decide(&obs, &cands, &nodes, &model).unwrap().node_of(0), Some(1));
    }

    #[test]
    fn highest_q_wins() {
        let (enc, nodes, model, obs) = fixture();
        // Linear read-out of the one-hot slot for node 2.
        let mut net = CriticNetwork::zeros(&[enc.input_dim(), 1]);
        net.layers[0].weights[enc.state_dim() + 2] = 1.0;
        let agent = Agent {
            network: &net,
            encoder: &enc,
        };
        let cands = [candidate(0), candidate(1), candidate(2)];
        assert_eq!(agent.decide(&obs, &cands, &nodes, &model).unwrap().node_of(0), Some(2));
    }

    #[test]
    fn empty_candidate_list_is_an_error() {
        let (enc, nodes, model, obs) = fixture();
        let net = CriticNetwork::zeros(&[enc.input_dim(), 1]);
        let agent = Agent {
            network: &net,
            encoder: &enc,
        };
        assert!(agent.decide(&obs, &[], &nodes, &model).is_err());
    }
}
