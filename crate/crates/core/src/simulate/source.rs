//! Where offspring counts come from.
//!
//! The engine asks a [`DrawSource`] for the offspring counts along one child
//! type of a whole batch of same-type parents in one generation; the source
//! reports the nonzero counts. Different sources trade speed for coupling
//! guarantees.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::law::LawSampler;
use crate::model::Model;
use crate::stream::{Seed, StreamKey, LANE_TAPE_BASE};

/// Supplies offspring counts to the engine.
pub trait DrawSource {
    /// Draws `B_{child<-parent}` for `count` parents of generation `gen` and
    /// passes every nonzero value to `sink`.
    fn draws<F: FnMut(u64)>(
        &mut self,
        model: &Model,
        gen: u32,
        parent: usize,
        child: usize,
        count: u64,
        sink: F,
    );
}

/// Batches at least this large skip over inactive parents geometrically.
const SKIP_MIN: u64 = 12;

fn draw_batch<R: Rng, F: FnMut(u64)>(sampler: &LawSampler, rng: &mut R, count: u64, mut sink: F) {
    let p = sampler.activity();
    if p == 0.0 {
        return;
    }
    if count < SKIP_MIN || p >= 0.5 {
        for _ in 0..count {
            let b = sampler.sample(rng);
            if b > 0 {
                sink(b);
            }
        }
        return;
    }
    // Gaps between active parents are geometric with success probability p.
    let ln_q = (-p).ln_1p();
    let mut pos = 0u64;
    loop {
        let u: f64 = rng.random();
        let gap = ((1.0 - u).ln() / ln_q).floor();
        if gap >= (count - pos) as f64 {
            return;
        }
        pos += gap as u64;
        let b = sampler.sample_active(rng);
        if b > 0 {
            sink(b);
        }
        pos += 1;
        if pos >= count {
            return;
        }
    }
}

/// One sequential stream per cluster: the fastest exact source.
pub struct StreamSource {
    rng: ChaCha8Rng,
}

impl StreamSource {
    pub fn new(key: StreamKey) -> Self {
        StreamSource { rng: key.rng() }
    }
}

impl DrawSource for StreamSource {
    #[inline]
    fn draws<F: FnMut(u64)>(&mut self, model: &Model, _gen: u32, parent: usize, child: usize, count: u64, sink: F) {
        draw_batch(model.sampler(child, parent), &mut self.rng, count, sink);
    }
}

/// Per-`(generation, parent type, child type)` tapes: the `m`-th parent of a
/// given type in a given generation always receives the `m`-th value of its
/// tape. Running the engine at several thresholds on the same tapes couples
/// the results monotonically.
pub struct TapeSource {
    seed: Seed,
    sample_index: u64,
}

impl TapeSource {
    pub fn new(key: StreamKey) -> Self {
        TapeSource {
            seed: Seed(key.master_seed).derive(key.lane as u64),
            sample_index: key.sample_index,
        }
    }
}

impl DrawSource for TapeSource {
    fn draws<F: FnMut(u64)>(&mut self, model: &Model, gen: u32, parent: usize, child: usize, count: u64, mut sink: F) {
        let d = model.dim();
        let lane = LANE_TAPE_BASE + (parent * d + child) as u32;
        let mut rng = self.seed.derive(gen as u64).key(self.sample_index, lane).rng();
        let sampler = model.sampler(child, parent);
        for _ in 0..count {
            let b = sampler.sample(&mut rng);
            if b > 0 {
                sink(b);
            }
        }
    }
}

/// Replays scripted draws in call order; for tests and worked examples.
///
/// Each engine call `(gen, parent, child, count)` consumes the next entry of
/// the script, which lists the nonzero counts for that batch. An exhausted
/// script yields no offspring.
#[derive(Debug, Clone, Default)]
pub struct ScriptedSource {
    script: std::collections::VecDeque<Vec<u64>>,
    /// Calls that asked for at least one parent.
    pub calls: Vec<(u32, usize, usize, u64)>,
}

impl ScriptedSource {
    pub fn new(script: Vec<Vec<u64>>) -> Self {
        ScriptedSource {
            script: script.into(),
            calls: Vec::new(),
        }
    }
}

impl DrawSource for ScriptedSource {
    fn draws<F: FnMut(u64)>(&mut self, _model: &Model, gen: u32, parent: usize, child: usize, count: u64, mut sink: F) {
        self.calls.push((gen, parent, child, count));
        if let Some(values) = self.script.pop_front() {
            assert!(values.len() as u64 <= count, "script gives more draws than parents");
            for v in values.into_iter().filter(|&v| v > 0) {
                sink(v);
            }
        }
    }
}
