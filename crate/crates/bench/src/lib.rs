//! Fixtures shared by the benchmarks.

use bitbias_core::io::{synthesize, SynthSpec};
use bitbias_core::{MarkovParams, StudyRecord};

/// A 380-study database drawn from a persistent source.
pub fn markov_database(seed: u64) -> Vec<StudyRecord> {
    let params = MarkovParams::symmetric(0.83).expect("valid parameters");
    synthesize(&SynthSpec::new(380, params, seed)).expect("synthesis succeeds")
}
