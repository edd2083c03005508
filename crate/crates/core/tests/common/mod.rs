//! Test-only oracles, independent of the library's decoding path.
#![allow(dead_code)]

/// Every legal trace over a `2S+1` blank-interleaved path for `frames`
/// frames, found by plain enumeration of monotone position sequences and
/// filtered against the trace rules stated directly.
pub fn enumerate_legal_traces(states: &[usize], frames: usize) -> Vec<Vec<usize>> {
    let last = states.len() - 1;
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(frames);
    for start in 0..=1.min(last) {
        cur.push(start);
        extend(states, frames, &mut cur, &mut out);
        cur.pop();
    }
    out.retain(|trace| {
        let end = *trace.last().unwrap();
        let ends_ok = end == last || end + 1 == last;
        let skips_ok = trace
            .windows(2)
            .all(|w| w[1] - w[0] != 2 || states[w[1]] != states[w[0]]);
        let visits_all = (1..states.len()).step_by(2).all(|p| trace.contains(&p));
        ends_ok && skips_ok && visits_all
    });
    out
}

fn extend(states: &[usize], frames: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == frames {
        out.push(cur.clone());
        return;
    }
    let s = *cur.last().unwrap();
    let remaining = frames - cur.len();
    for step in 0..=2 {
        let next = s + step;
        // prune branches that can no longer get near the end of the path
        if next >= states.len() || next + 2 * remaining + 1 < states.len() - 1 {
            continue;
        }
        cur.push(next);
        extend(states, frames, cur, out);
        cur.pop();
    }
}

/// Total log-probability of a trace, summed in frame order.
pub fn score_trace(rows: &[Vec<f32>], states: &[usize], trace: &[usize]) -> f64 {
    let mut acc = 0.0f64;
    for (t, &pos) in trace.iter().enumerate() {
        acc += rows[t][states[pos]] as f64;
    }
    acc
}

/// (best score, every trace achieving it); `None` when no legal trace exists.
pub fn oracle_best(rows: &[Vec<f32>], states: &[usize]) -> Option<(f64, Vec<Vec<usize>>)> {
    let traces = enumerate_legal_traces(states, rows.len());
    if traces.is_empty() {
        return None;
    }
    let scored: Vec<(f64, Vec<usize>)> =
        traces.into_iter().map(|t| (score_trace(rows, states, &t), t)).collect();
    let best = scored.iter().map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
    let argmax = scored.into_iter().filter(|(s, _)| *s == best).map(|(_, t)| t).collect();
    Some((best, argmax))
}

/// Nearest-distance and matching computed by exhaustive pairwise scan.
pub fn brute_nearest(x: f64, pool: &[f64]) -> f64 {
    pool.iter().map(|p| (p - x).abs()).fold(f64::INFINITY, f64::min)
}

/// A small random decoding problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub rows: Vec<Vec<f32>>,
    pub targets: Vec<usize>,
    pub blank: usize,
}

impl Instance {
    pub fn states(&self) -> Vec<usize> {
        let mut s = vec![self.blank];
        for &t in &self.targets {
            s.push(t);
            s.push(self.blank);
        }
        s
    }
}

/// Draws T ≤ 10, S ≤ 3, V ≤ 5 with repeated targets, −∞ entries and coarse
/// values that force score ties.
pub fn random_instance<R: rand::Rng>(rng: &mut R) -> Instance {
    let v = rng.gen_range(2..=5);
    let blank = rng.gen_range(0..v);
    let s = rng.gen_range(1..=3);
    let t = rng.gen_range(1..=10);
    let labels: Vec<usize> = (0..v).filter(|&c| c != blank).collect();
    let mut targets = Vec::with_capacity(s);
    for i in 0..s {
        if i > 0 && rng.gen_bool(0.3) {
            targets.push(targets[i - 1]);
        } else {
            targets.push(labels[rng.gen_range(0..labels.len())]);
        }
    }
    let coarse = rng.gen_bool(0.3);
    let rows = (0..t)
        .map(|_| {
            (0..v)
                .map(|_| {
                    if rng.gen_bool(0.1) {
                        f32::NEG_INFINITY
                    } else if coarse {
                        -(rng.gen_range(0..4) as f32) * 0.5
                    } else {
                        rng.gen::<f32>().max(1e-6).ln()
                    }
                })
                .collect()
        })
        .collect();
    Instance { rows, targets, blank }
}
