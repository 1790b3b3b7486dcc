//! Generation-wise growth of (possibly pruned) forests.

use super::source::DrawSource;
use crate::model::Model;

/// Reusable buffers and tallies for growing forests.
///
/// Tallies accumulate across calls to [`Forest::grow`] until [`Forest::reset`].
#[derive(Debug, Clone)]
pub struct Forest {
    d: usize,
    /// Individuals of each type, roots included.
    pub totals: Vec<u64>,
    /// Pruned mass per child type.
    pub w: Vec<u64>,
    /// Pruning events per child type.
    pub n: Vec<u64>,
    /// Pruning events per `(child, parent)`, row-major in the child index.
    pub pair_n: Vec<u64>,
    /// Every drawn child per type, kept or pruned.
    pub births: Vec<u64>,
    /// Individuals created so far, for the node cap.
    pub nodes: u64,
    pub censored: bool,
    cur: Vec<u64>,
    next: Vec<u64>,
}

impl Forest {
    pub fn new(d: usize) -> Self {
        Forest {
            d,
            totals: vec![0; d],
            w: vec![0; d],
            n: vec![0; d],
            pair_n: vec![0; d * d],
            births: vec![0; d],
            nodes: 0,
            censored: false,
            cur: vec![0; d],
            next: vec![0; d],
        }
    }

    pub fn reset(&mut self) {
        self.totals.fill(0);
        self.w.fill(0);
        self.n.fill(0);
        self.pair_n.fill(0);
        self.births.fill(0);
        self.nodes = 0;
        self.censored = false;
    }

    /// Grows the forest with `roots[i]` roots of type `i`. Draws above
    /// `threshold` are pruned (recorded, not grown). Stops and flags
    /// censoring once more than `cap` individuals exist in total.
    pub fn grow<S: DrawSource>(
        &mut self,
        model: &Model,
        roots: &[u64],
        threshold: Option<u64>,
        source: &mut S,
        cap: u64,
    ) {
        let d = self.d;
        let limit = threshold.unwrap_or(u64::MAX);
        self.cur.copy_from_slice(roots);
        for (t, &r) in self.totals.iter_mut().zip(roots) {
            *t = t.saturating_add(r);
            self.nodes = self.nodes.saturating_add(r);
        }
        if self.nodes > cap {
            self.censored = true;
            return;
        }
        let mut gen = 0u32;
        loop {
            self.next.fill(0);
            let mut any = false;
            for l in 0..d {
                let count = self.cur[l];
                if count == 0 {
                    continue;
                }
                for i in 0..d {
                    let next = &mut self.next[i];
                    let births = &mut self.births[i];
                    let w = &mut self.w[i];
                    let n = &mut self.n[i];
                    let pair = &mut self.pair_n[i * d + l];
                    source.draws(model, gen, l, i, count, |b| {
                        *births = births.saturating_add(b);
                        if b > limit {
                            *w = w.saturating_add(b);
                            *n += 1;
                            *pair += 1;
                        } else {
                            *next = next.saturating_add(b);
                        }
                    });
                    any |= *next > 0;
                }
            }
            if !any {
                return;
            }
            for i in 0..d {
                self.totals[i] = self.totals[i].saturating_add(self.next[i]);
                self.nodes = self.nodes.saturating_add(self.next[i]);
            }
            if self.nodes > cap {
                self.censored = true;
                return;
            }
            std::mem::swap(&mut self.cur, &mut self.next);
            gen += 1;
        }
    }
}
