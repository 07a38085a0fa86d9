use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HarnessError, Workload};
use crate::queryspec::QueryInstance;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadPlan {
    pub seed: u64,
    /// Every (enabled template, parameter set) pair exactly once, shuffled.
    pub instances: Vec<QueryInstance>,
    /// `assignments[c]` lists the positions in `instances` that client `c` issues, in order.
    pub assignments: Vec<Vec<usize>>,
}

impl WorkloadPlan {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn clients(&self) -> usize {
        self.assignments.len()
    }

    pub fn client_instances(&self, client: usize) -> impl Iterator<Item = &QueryInstance> {
        self.assignments[client].iter().map(|&i| &self.instances[i])
    }

    /// SHA-256 over the serialized order and assignment; equal digests mean
    /// byte-identical plans.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(&(&self.instances, &self.assignments)).expect("plan serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// First instance of each template in plan order.
    pub fn warmup_instances(&self) -> Vec<&QueryInstance> {
        let mut seen = std::collections::HashSet::new();
        self.instances.iter().filter(|qi| seen.insert(qi.template.as_str())).collect()
    }
}

/// Shuffles all instances of the enabled templates (Fisher–Yates, seeded) and
/// deals them round-robin to `clients` sub-lists.
pub fn build_plan(workload: &Workload, clients: usize, seed: u64) -> Result<WorkloadPlan, HarnessError> {
    if clients == 0 {
        return Err(HarnessError::Config("a plan needs at least one client".into()));
    }
    let mut instances = Vec::new();
    for template in workload.registry.enabled() {
        let sets = workload
            .params
            .get(&template.name)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| HarnessError::MissingParams(template.name.clone()))?;
        let canonical_id = template.canonical_id().map(str::to_string);
        instances.extend(sets.iter().map(|ps| QueryInstance {
            template: template.name.clone(),
            param_set: ps.id,
            canonical_id: canonical_id.clone(),
        }));
    }
    if instances.is_empty() {
        return Err(HarnessError::EmptyWorkload);
    }
    instances.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![Vec::with_capacity(instances.len() / clients + 1); clients];
    for i in 0..instances.len() {
        assignments[i % clients].push(i);
    }
    Ok(WorkloadPlan { seed, instances, assignments })
}
