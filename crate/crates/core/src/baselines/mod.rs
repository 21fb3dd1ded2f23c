//! Comparison methods: linear probes with control tasks, and integrated gradients.

mod attribution;
mod probe;

pub use attribution::{
    integrated_gradients, matched_position_study, network_attribution, position_scores, sign_test,
    single_differing_slot, Attribution, LinearFunction, MatchedStudy, NetworkLogit, ScalarFunction,
};
pub use probe::{
    inert_branch_study, node_target, probe_features, probe_location, probe_table, selectivity, train_probe,
    ControlTask, InertBranchReport, LinearProbe, ProbeConfig, ProbeReport,
};
