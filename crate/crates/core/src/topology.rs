//! Factored action space: agents, operations, joint actions and their
//! one-hot encoding.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Agents per searched cell: one per pair of nodes in a 4-intermediate-node cell.
pub const AGENTS_PER_CELL: usize = 14;

/// `N` agents, each choosing among the same `K` operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawTopology"))]
pub struct Topology {
    num_agents: usize,
    num_actions: usize,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    num_agents: usize,
    num_actions: usize,
}

#[cfg(feature = "serde")]
impl TryFrom<RawTopology> for Topology {
    type Error = Error;

    fn try_from(raw: RawTopology) -> Result<Self> {
        Topology::new(raw.num_agents, raw.num_actions)
    }
}

impl Topology {
    pub fn new(num_agents: usize, num_actions: usize) -> Result<Self> {
        if num_agents == 0 {
            return Err(Error::Topology("num_agents must be at least 1".into()));
        }
        if num_actions == 0 {
            return Err(Error::Topology("num_actions must be at least 1".into()));
        }
        Ok(Topology {
            num_agents,
            num_actions,
        })
    }

    /// One agent per node pair of each cell, `14 * cells` agents in total.
    pub fn from_cells(cells: usize, num_actions: usize) -> Result<Self> {
        let agents = cells
            .checked_mul(AGENTS_PER_CELL)
            .ok_or_else(|| Error::Topology(format!("{cells} cells overflow the agent count")))?;
        Topology::new(agents, num_actions)
    }

    #[inline]
    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    #[inline]
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Length `K * N` of an architecture vector.
    #[inline]
    pub fn dim(&self) -> usize {
        self.num_agents * self.num_actions
    }

    /// `K^N`, or `None` when it does not fit in a `u128`.
    pub fn joint_space_size(&self) -> Option<u128> {
        let k = self.num_actions as u128;
        let n = u32::try_from(self.num_agents).ok()?;
        k.checked_pow(n)
    }

    /// Iterates every joint action in lexicographic order.
    pub fn joint_actions(&self) -> JointActions {
        JointActions {
            topo: *self,
            next: Some(vec![0; self.num_agents]),
        }
    }
}

/// Lexicographic odometer over all `K^N` joint actions.
#[derive(Debug, Clone)]
pub struct JointActions {
    topo: Topology,
    next: Option<Vec<usize>>,
}

impl Iterator for JointActions {
    type Item = JointAction;

    fn next(&mut self) -> Option<JointAction> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let k = self.topo.num_actions;
        let mut carried = true;
        for slot in succ.iter_mut().rev() {
            *slot += 1;
            if *slot < k {
                carried = false;
                break;
            }
            *slot = 0;
        }
        if !carried {
            self.next = Some(succ);
        }
        Some(JointAction(current))
    }
}

/// One action index per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct JointAction(Vec<usize>);

impl JointAction {
    /// Wraps raw indices without checking them against a topology.
    pub fn new(actions: Vec<usize>) -> Self {
        JointAction(actions)
    }

    pub fn checked(actions: Vec<usize>, topo: &Topology) -> Result<Self> {
        let joint = JointAction(actions);
        joint.validate(topo)?;
        Ok(joint)
    }

    pub fn validate(&self, topo: &Topology) -> Result<()> {
        if self.0.len() != topo.num_agents() {
            return Err(Error::Topology(format!(
                "joint action has {} entries, topology has {} agents",
                self.0.len(),
                topo.num_agents()
            )));
        }
        if let Some((agent, &a)) = self
            .0
            .iter()
            .enumerate()
            .find(|(_, &a)| a >= topo.num_actions())
        {
            return Err(Error::Topology(format!(
                "agent {agent} plays action {a}, only {} actions exist",
                topo.num_actions()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    /// Flat positions `i * K + a_i` of the active bits.
    pub fn active_indices(&self, num_actions: usize) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .map(move |(i, &a)| i * num_actions + a)
    }
}

impl From<Vec<usize>> for JointAction {
    fn from(actions: Vec<usize>) -> Self {
        JointAction(actions)
    }
}

/// Binary vector of length `K * N`, agent-major: agent `i` owns
/// `[i * K, (i + 1) * K)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct ArchitectureVector(Vec<u8>);

impl ArchitectureVector {
    /// Raw bits; feasibility is only checked by [`decode`].
    pub fn from_bits(bits: Vec<u8>) -> Self {
        ArchitectureVector(bits)
    }

    #[inline]
    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn hamming_weight(&self) -> usize {
        self.0.iter().filter(|&&b| b != 0).count()
    }

    /// `w^T z`.
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(weights)
            .filter(|(&b, _)| b != 0)
            .map(|(_, &w)| w)
            .sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from(b)).collect()
    }
}

pub fn encode(joint: &JointAction, topo: &Topology) -> Result<ArchitectureVector> {
    joint.validate(topo)?;
    let mut bits = vec![0u8; topo.dim()];
    for idx in joint.active_indices(topo.num_actions()) {
        bits[idx] = 1;
    }
    Ok(ArchitectureVector(bits))
}

pub fn decode(vec: &ArchitectureVector, topo: &Topology) -> Result<JointAction> {
    if vec.len() != topo.dim() {
        return Err(Error::Topology(format!(
            "architecture vector has length {}, expected K*N = {}",
            vec.len(),
            topo.dim()
        )));
    }
    let k = topo.num_actions();
    let mut actions = Vec::with_capacity(topo.num_agents());
    for (agent, block) in vec.bits().chunks_exact(k).enumerate() {
        let mut ones = 0;
        let mut chosen = 0;
        for (a, &b) in block.iter().enumerate() {
            match b {
                0 => {}
                1 => {
                    ones += 1;
                    chosen = a;
                }
                other => {
                    return Err(Error::Input(format!(
                        "architecture vector entry {other} in agent {agent} block is not binary"
                    )))
                }
            }
        }
        if ones != 1 {
            return Err(Error::Infeasible { agent, ones });
        }
        actions.push(chosen);
    }
    Ok(JointAction(actions))
}

/// A finite validation loss.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct LossValue(f64);

impl LossValue {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(LossValue(value))
        } else {
            Err(Error::Input(format!("loss {value} is not finite")))
        }
    }

    /// Checked, never clamped, against `[0, 1]`.
    pub fn unit(value: f64) -> Result<Self> {
        let loss = LossValue::new(value)?;
        if (0.0..=1.0).contains(&value) {
            Ok(loss)
        } else {
            Err(Error::LossOutOfRange {
                round: 0,
                loss: value,
            })
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn topo(n: usize, k: usize) -> Topology {
        Topology::new(n, k).unwrap()
    }

    #[test]
    fn encode_examples() {
        let z = encode(&JointAction::new(vec![0, 1]), &topo(2, 2)).unwrap();
        assert_eq!(z.bits(), &[1, 0, 0, 1]);

        let z = encode(&JointAction::new(vec![0]), &topo(1, 1)).unwrap();
        assert_eq!(z.bits(), &[1]);

        let z = encode(&JointAction::new(vec![3, 0, 2]), &topo(3, 4)).unwrap();
        let ones: Vec<usize> = z
            .bits()
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(ones, vec![3, 4, 10]);
    }

    #[test]
    fn encode_rejects_bad_shapes() {
        assert!(matches!(
            encode(&JointAction::new(vec![0]), &topo(2, 2)),
            Err(Error::Topology(_))
        ));
        assert!(matches!(
            encode(&JointAction::new(vec![0, 2]), &topo(2, 2)),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn decode_examples() {
        let j = decode(&ArchitectureVector::from_bits(vec![0, 1, 1, 0]), &topo(2, 2)).unwrap();
        assert_eq!(j.actions(), &[1, 0]);

        let err = decode(&ArchitectureVector::from_bits(vec![1, 1]), &topo(1, 2)).unwrap_err();
        assert_eq!(err, Error::Infeasible { agent: 0, ones: 2 });

        let err = decode(&ArchitectureVector::from_bits(vec![0, 0]), &topo(1, 2)).unwrap_err();
        assert_eq!(err, Error::Infeasible { agent: 0, ones: 0 });

        let j = decode(&ArchitectureVector::from_bits(vec![1]), &topo(1, 1)).unwrap();
        assert_eq!(j.actions(), &[0]);
    }

    #[test]
    fn topology_guards() {
        assert!(Topology::new(0, 3).is_err());
        assert!(Topology::new(3, 0).is_err());
        assert_eq!(topo(3, 4).joint_space_size(), Some(64));
        assert_eq!(topo(112, 8).joint_space_size(), None);
        assert_eq!(topo(42, 8).joint_space_size(), Some(1u128 << 126));
    }

    #[test]
    fn cells_to_agents() {
        assert_eq!(Topology::from_cells(8, 8).unwrap().num_agents(), 112);
        assert_eq!(Topology::from_cells(20, 8).unwrap().num_agents(), 280);
        assert!(Topology::from_cells(0, 8).is_err());
    }

    #[test]
    fn joint_action_enumeration_is_lexicographic_and_complete() {
        let all: Vec<_> = topo(2, 3).joint_actions().map(JointAction::into_inner).collect();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[8], vec![2, 2]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(topo(1, 1).joint_actions().count(), 1);
    }

    #[test]
    fn loss_value_checks() {
        assert!(LossValue::new(f64::NAN).is_err());
        assert!(LossValue::new(f64::INFINITY).is_err());
        assert_eq!(LossValue::new(2.5).unwrap().get(), 2.5);
        assert!(LossValue::unit(1.0).is_ok());
        assert!(matches!(
            LossValue::unit(1.5),
            Err(Error::LossOutOfRange { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_joint() -> impl Strategy<Value = (Topology, JointAction)> {
            (1usize..8, 1usize..7).prop_flat_map(|(n, k)| {
                proptest::collection::vec(0..k, n)
                    .prop_map(move |a| (Topology::new(n, k).unwrap(), JointAction::new(a)))
            })
        }

        proptest! {
            #[test]
            fn decode_inverts_encode((t, j) in arb_joint()) {
                let z = encode(&j, &t).unwrap();
                prop_assert_eq!(z.hamming_weight(), t.num_agents());
                prop_assert_eq!(decode(&z, &t).unwrap(), j);
            }
        }
    }
}
