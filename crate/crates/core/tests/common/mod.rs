//! Independent oracles shared by the integration tests and the acceptance
//! runner. Nothing here calls into the code it is meant to check.
#![allow(dead_code, clippy::needless_range_loop)]

pub mod dot_grammar;

use std::collections::BTreeSet;

use careflow::eventlog::{
    Demographics, EventInstance, EventLog, Insurance, Outcome, Timestamp, Trace, MS_PER_HOUR,
};
use careflow::model::{NetworkWeights, PredictionDataset, DEMOGRAPHIC_WIDTH};
use careflow::petrinet::{Arc, Firing, Marking, PetriNet, ReplayResult};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HORIZON: usize = 5;

// ---------------------------------------------------------------------------
// random nets and traces

const TRANSITION_IDS: [&str; 6] = ["tk", "tb", "tx", "ta", "tm", "te"];

/// A small random workflow-ish net: 2 to 6 places (first is the source, last
/// the sink), 1 to 6 transitions with 1 or 2 weighted inputs and outputs.
/// Transition ids are shuffled so id order differs from creation order.
pub fn random_net(rng: &mut ChaCha8Rng, labels: &[&str]) -> PetriNet {
    loop {
        let n_places = rng.gen_range(2..=6);
        let n_trans = rng.gen_range(1..=6);
        let mut ids = TRANSITION_IDS.to_vec();
        ids.shuffle(rng);
        let mut pool = labels.to_vec();
        pool.shuffle(rng);

        let places: Vec<String> = (0..n_places).map(|i| format!("p{i}")).collect();
        let mut b = PetriNet::builder();
        for p in &places {
            b.place(p.clone());
        }
        b.source("p0").sink(places[n_places - 1].clone());
        for &id in ids.iter().take(n_trans) {
            if rng.gen_bool(0.6) && !pool.is_empty() {
                b.visible(id, pool.pop().unwrap());
            } else {
                b.hidden(id);
            }
            let mut ins = BTreeSet::new();
            for _ in 0..rng.gen_range(1..=2) {
                ins.insert(rng.gen_range(0..n_places - 1));
            }
            let mut outs = BTreeSet::new();
            for _ in 0..rng.gen_range(1..=2) {
                outs.insert(rng.gen_range(1..n_places));
            }
            for p in ins {
                let w = if rng.gen_bool(0.8) { 1 } else { 2 };
                b.weighted_arc(places[p].clone(), id, w);
            }
            for p in outs {
                let w = if rng.gen_bool(0.8) { 1 } else { 2 };
                b.weighted_arc(id, places[p].clone(), w);
            }
        }
        if rng.gen_bool(0.3) {
            b.tokens("p0", rng.gen_range(1..=2));
            let extra = rng.gen_range(0..n_places);
            b.tokens(places[extra].clone(), rng.gen_range(0..=2));
        }
        if let Ok(net) = b.build() {
            return net;
        }
    }
}

/// Up to `max_len` events drawn from `alphabet`, strictly increasing times.
pub fn random_events(
    rng: &mut ChaCha8Rng,
    alphabet: &[&str],
    max_len: usize,
) -> Vec<EventInstance> {
    let len = rng.gen_range(0..=max_len);
    let mut t = rng.gen_range(0..1_000i64);
    (0..len)
        .map(|_| {
            t += rng.gen_range(1..5_000);
            EventInstance::new(*alphabet.choose(rng).unwrap(), t)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// brute-force replay

/// Replay outcome plus every token entry in order, for the decay oracle.
pub struct Simulation {
    pub result: ReplayResult,
    pub entries: Vec<(usize, u32, Timestamp)>,
}

struct Sim<'a> {
    net: &'a PetriNet,
    inputs: Vec<Vec<(usize, u32)>>,
    outputs: Vec<Vec<(usize, u32)>>,
    hidden: Vec<usize>,
    marking: Vec<u32>,
    timeline: Vec<Firing>,
    entry_times: Vec<Option<Timestamp>>,
    entry_counts: Vec<u64>,
    entries: Vec<(usize, u32, Timestamp)>,
    missing: u64,
}

impl Sim<'_> {
    fn enabled(&self, m: &[u32], t: usize) -> bool {
        self.inputs[t].iter().all(|&(p, w)| m[p] >= w)
    }

    fn apply(&self, m: &mut [u32], t: usize) {
        for &(p, w) in &self.inputs[t] {
            m[p] -= w;
        }
        for &(p, w) in &self.outputs[t] {
            m[p] += w;
        }
    }

    fn enter(&mut self, p: usize, n: u32, at: Timestamp) {
        self.entry_times[p] = Some(at);
        self.entry_counts[p] += u64::from(n);
        self.entries.push((p, n, at));
    }

    fn fire(&mut self, t: usize, at: Timestamp) {
        let mut m = std::mem::take(&mut self.marking);
        self.apply(&mut m, t);
        self.marking = m;
        for (p, w) in self.outputs[t].clone() {
            self.enter(p, w, at);
        }
        self.timeline.push(Firing {
            transition: t,
            timestamp: at,
        });
    }

    /// Tries every hidden sequence of exactly `len` firings in
    /// lexicographic id order; returns the first reaching `goal`.
    fn sequences(
        &self,
        m: &[u32],
        len: usize,
        goal: &dyn Fn(&[u32]) -> bool,
        path: &mut Vec<usize>,
    ) -> bool {
        if len == 0 {
            return goal(m);
        }
        for &h in &self.hidden {
            if !self.enabled(m, h) {
                continue;
            }
            let mut next = m.to_vec();
            self.apply(&mut next, h);
            path.push(h);
            if self.sequences(&next, len - 1, goal, path) {
                return true;
            }
            path.pop();
        }
        false
    }

    fn search(&self, goal: &dyn Fn(&[u32]) -> bool) -> Option<Vec<usize>> {
        for len in 1..=HORIZON {
            let mut path = Vec::new();
            if self.sequences(&self.marking, len, goal, &mut path) {
                return Some(path);
            }
        }
        None
    }
}

/// Step-by-step replay that enumerates hidden firing sequences exhaustively
/// instead of searching the state space.
pub fn simulate(net: &PetriNet, events: &[EventInstance], cutoff: Option<Timestamp>) -> Simulation {
    let np = net.places().len();
    let nt = net.transitions().len();
    let mut inputs = vec![Vec::new(); nt];
    let mut outputs = vec![Vec::new(); nt];
    for arc in net.arcs() {
        match *arc {
            Arc::Input {
                place,
                transition,
                weight,
            } => inputs[transition].push((place, weight)),
            Arc::Output {
                transition,
                place,
                weight,
            } => outputs[transition].push((place, weight)),
        }
    }
    let mut hidden: Vec<usize> = (0..nt)
        .filter(|&t| net.transitions()[t].label.is_none())
        .collect();
    hidden.sort_by(|&a, &b| net.transitions()[a].id.cmp(&net.transitions()[b].id));
    let initial: Vec<u32> = (0..np).map(|p| net.initial_marking().get(p)).collect();
    let mut sim = Sim {
        net,
        inputs,
        outputs,
        hidden,
        marking: initial.clone(),
        timeline: Vec::new(),
        entry_times: vec![None; np],
        entry_counts: vec![0; np],
        entries: Vec::new(),
        missing: 0,
    };

    let mut last = None;
    for (i, e) in events.iter().enumerate() {
        if cutoff.is_some_and(|c| e.timestamp > c) {
            break;
        }
        if i == 0 {
            for (p, &n) in initial.iter().enumerate() {
                if n > 0 {
                    sim.enter(p, n, e.timestamp);
                }
            }
        }
        last = Some(e.timestamp);
        let Some(t) =
            (0..nt).find(|&t| sim.net.transitions()[t].label.as_deref() == Some(e.event.as_str()))
        else {
            sim.missing += 1;
            continue;
        };
        if !sim.enabled(&sim.marking, t) {
            let ins = sim.inputs[t].clone();
            let goal = move |m: &[u32]| ins.iter().all(|&(p, w)| m[p] >= w);
            match sim.search(&goal) {
                Some(path) => {
                    for h in path {
                        sim.fire(h, e.timestamp);
                    }
                }
                None => {
                    for (p, w) in sim.inputs[t].clone() {
                        if sim.marking[p] < w {
                            sim.missing += u64::from(w - sim.marking[p]);
                            sim.marking[p] = w;
                        }
                    }
                }
            }
        }
        sim.fire(t, e.timestamp);
    }

    let sink = net.sink();
    let mut remaining = 0;
    if cutoff.is_none() {
        if let Some(at) = last {
            if sim.marking[sink] == 0 {
                if let Some(path) = sim.search(&|m: &[u32]| m[sink] > 0) {
                    for h in path {
                        sim.fire(h, at);
                    }
                }
            }
        }
        remaining = (0..np)
            .filter(|&p| p != sink)
            .map(|p| u64::from(sim.marking[p]))
            .sum();
    }
    Simulation {
        result: ReplayResult {
            final_marking: Marking::from_counts(sim.marking),
            firing_timeline: sim.timeline,
            place_entry_times: sim.entry_times,
            place_entry_counts: sim.entry_counts,
            missing_tokens: sim.missing,
            remaining_tokens: remaining,
        },
        entries: sim.entries,
    }
}

/// Decay rates and count normalizers from replay entry lists: reciprocal
/// mean gap per place, falling back to the reciprocal mean trace duration.
pub fn gap_average_params(net: &PetriNet, traces: &[Vec<EventInstance>]) -> (Vec<f64>, Vec<f64>) {
    let np = net.places().len();
    let mut gap_sum = vec![0.0; np];
    let mut gap_n = vec![0usize; np];
    let mut max_count = vec![0u64; np];
    let mut durations = Vec::new();
    for events in traces {
        let sim = simulate(net, events, None);
        for p in 0..np {
            let times: Vec<Timestamp> = sim
                .entries
                .iter()
                .filter(|e| e.0 == p)
                .map(|e| e.2)
                .collect();
            for w in times.windows(2) {
                gap_sum[p] += (w[1] - w[0]) as f64;
                gap_n[p] += 1;
            }
            let total: u64 = sim
                .entries
                .iter()
                .filter(|e| e.0 == p)
                .map(|e| u64::from(e.1))
                .sum();
            max_count[p] = max_count[p].max(total);
        }
        durations.push(match (events.first(), events.last()) {
            (Some(a), Some(b)) => (b.timestamp - a.timestamp) as f64,
            _ => 0.0,
        });
    }
    let mean_duration = durations.iter().sum::<f64>() / durations.len() as f64;
    let delta = (0..np)
        .map(|p| {
            let mean_gap = if gap_n[p] > 0 {
                gap_sum[p] / gap_n[p] as f64
            } else {
                0.0
            };
            if mean_gap > 0.0 {
                1.0 / mean_gap
            } else if mean_duration > 0.0 {
                1.0 / mean_duration
            } else {
                0.0
            }
        })
        .collect();
    let scale = max_count.iter().map(|&c| c.max(1) as f64).collect();
    (delta, scale)
}

// ---------------------------------------------------------------------------
// logs

pub fn trace(case_id: &str, events: &[(&str, f64)], age: u32, prior: u32, died: bool) -> Trace {
    let admit = 1_600_000_000_000i64;
    let mut instances: Vec<EventInstance> = events
        .iter()
        .map(|&(e, h)| EventInstance::new(e, admit + (h * MS_PER_HOUR as f64) as i64))
        .collect();
    let last_h = events.last().map_or(0.0, |e| e.1);
    let exit = if died { "DEATH" } else { "DISCH" };
    instances.push(EventInstance::new(
        exit,
        admit + ((last_h + 30.0) * MS_PER_HOUR as f64) as i64,
    ));
    Trace {
        case_id: case_id.to_string(),
        instances,
        demographics: Demographics {
            age,
            insurance: Insurance::Medicare,
        },
        outcome: if died {
            Outcome::Died
        } else {
            Outcome::Discharged
        },
        admit_timestamp: admit,
        prior_admissions: prior,
    }
}

/// `n` minimal traces with distinct ids.
pub fn simple_log(n: usize) -> EventLog {
    let traces = (0..n)
        .map(|i| {
            trace(
                &format!("c{i:05}"),
                &[("ADM_EMERGENCY", 0.0)],
                60,
                1,
                i % 6 == 0,
            )
        })
        .collect();
    EventLog::from_traces(traces).unwrap()
}

// ---------------------------------------------------------------------------
// evaluation

/// Fraction of positive/negative pairs ordered correctly, ties one half.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                num += 1.0;
            } else if si == sj {
                num += 0.5;
            }
        }
    }
    num / pairs
}

/// Percentile interval of the AUC over resamples drawn with replacement
/// separately within each class.
pub fn stratified_bootstrap_ci(
    scores: &[f64],
    labels: &[u8],
    resamples: usize,
    level: f64,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 1)
        .map(|(&s, _)| s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 0)
        .map(|(&s, _)| s)
        .collect();
    let mut aucs = Vec::with_capacity(resamples);
    let mut p = vec![0.0; pos.len()];
    let mut q = vec![0.0; neg.len()];
    for _ in 0..resamples {
        p.iter_mut()
            .for_each(|x| *x = pos[rng.gen_range(0..pos.len())]);
        q.iter_mut()
            .for_each(|x| *x = neg[rng.gen_range(0..neg.len())]);
        let mut num = 0.0;
        for &a in &p {
            for &b in &q {
                num += if a > b {
                    1.0
                } else if a == b {
                    0.5
                } else {
                    0.0
                };
            }
        }
        aucs.push(num / (p.len() * q.len()) as f64);
    }
    aucs.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let at = |q: f64| {
        let idx = (q * (resamples - 1) as f64).round() as usize;
        aucs[idx]
    };
    (at(alpha), at(1.0 - alpha))
}

/// Standard normal draw by Box-Muller.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Binormal scores: `n` rows, roughly `prevalence` positives shifted by `shift`.
pub fn binormal_scores(
    rng: &mut ChaCha8Rng,
    n: usize,
    prevalence: f64,
    shift: f64,
) -> (Vec<f64>, Vec<u8>) {
    let n_pos = ((n as f64 * prevalence).round() as usize).clamp(2, n - 2);
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_pos)).collect();
    let scores = labels
        .iter()
        .map(|&l| normal(rng) + if l == 1 { shift } else { 0.0 })
        .collect();
    (scores, labels)
}

/// 56 deaths (53 scored at or above 0.5) and 280 survivors (120 below).
pub fn confusion_fixture() -> (Vec<f64>, Vec<u8>) {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    let mut push = |n: usize, lo: f64, hi: f64, label: u8| {
        for i in 0..n {
            scores.push(lo + (hi - lo) * i as f64 / n as f64);
            labels.push(label);
        }
    };
    push(53, 0.5, 0.99, 1);
    push(3, 0.2, 0.45, 1);
    push(120, 0.01, 0.49, 0);
    push(160, 0.5, 0.9, 0);
    (scores, labels)
}

// ---------------------------------------------------------------------------
// attribution

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Average marginal contribution over all `k!` orderings.
pub fn permutation_shapley(k: usize, value: impl Fn(u32) -> f64) -> Vec<f64> {
    let orders = permutations(k);
    let mut phi = vec![0.0; k];
    for order in &orders {
        let mut mask = 0u32;
        for &i in order {
            let before = value(mask);
            mask |= 1 << i;
            phi[i] += value(mask) - before;
        }
    }
    phi.iter().map(|s| s / orders.len() as f64).collect()
}

// ---------------------------------------------------------------------------
// logistic regression on a handful of features

/// Newton-Raphson fit of `P(y=1) = σ(b0 + b·x)`; returns the linear scores.
pub fn logistic_scores(x: &[Vec<f64>], y: &[u8]) -> Vec<f64> {
    let d = x[0].len() + 1;
    let row = |i: usize| -> Vec<f64> {
        let mut r = vec![1.0];
        r.extend_from_slice(&x[i]);
        r
    };
    let mut beta = vec![0.0; d];
    for _ in 0..50 {
        let mut grad = vec![0.0; d];
        let mut hess = vec![vec![0.0; d]; d];
        for i in 0..x.len() {
            let r = row(i);
            let z: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            for a in 0..d {
                grad[a] += (f64::from(y[i]) - p) * r[a];
                for b in 0..d {
                    hess[a][b] += p * (1.0 - p) * r[a] * r[b];
                }
            }
        }
        let step = solve(hess, grad);
        beta.iter_mut().zip(&step).for_each(|(b, s)| *b += s);
        if step.iter().map(|s| s.abs()).fold(0.0, f64::max) < 1e-10 {
            break;
        }
    }
    (0..x.len())
        .map(|i| row(i).iter().zip(&beta).map(|(a, b)| a * b).sum())
        .collect()
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Abnormal lab events in the first 24 h and age, per trace.
pub fn generating_features(log: &EventLog) -> Vec<Vec<f64>> {
    log.traces()
        .iter()
        .map(|t| {
            let window = t.admit_timestamp + 24 * MS_PER_HOUR;
            let abnormal = t
                .instances
                .iter()
                .filter(|e| e.timestamp <= window && e.event.ends_with("_abn"))
                .count();
            vec![abnormal as f64, f64::from(t.demographics.age)]
        })
        .collect()
}

pub fn labels_of(log: &EventLog) -> Vec<u8> {
    log.traces().iter().map(|t| t.outcome.label()).collect()
}

// ---------------------------------------------------------------------------
// discovery

/// `A (B|C) D (E|F|G) H` with branch choices `b` and `e`.
pub fn xor_trace(b: usize, e: usize, start: Timestamp) -> Vec<EventInstance> {
    let names = ["A", ["B", "C"][b], "D", ["E", "F", "G"][e], "H"];
    names
        .iter()
        .enumerate()
        .map(|(i, n)| EventInstance::new(*n, start + i as i64 * 60_000))
        .collect()
}

/// `n` traces of the sequential/XOR process with seeded choices.
pub fn xor_log(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<EventInstance>> {
    (0..n)
        .map(|i| {
            xor_trace(
                rng.gen_range(0..2),
                rng.gen_range(0..3),
                i as i64 * 3_600_000,
            )
        })
        .collect()
}

/// Every trace the process can generate.
pub fn xor_variants() -> Vec<Vec<EventInstance>> {
    let mut out = Vec::new();
    for b in 0..2 {
        for e in 0..3 {
            out.push(xor_trace(b, e, 7_000_000_000));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// finite differences

/// Every parameter of `w`, layer by layer, weights before biases.
pub fn flat_parameters(w: &NetworkWeights<f64>) -> Vec<f64> {
    w.layers()
        .iter()
        .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
        .collect()
}

fn perturbed(w: &NetworkWeights<f64>, index: usize, h: f64) -> NetworkWeights<f64> {
    let mut out = w.clone();
    let target = out
        .layers_mut()
        .into_iter()
        .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
        .nth(index);
    match target {
        Some(x) => *x += h,
        None => panic!("parameter {index} out of range"),
    }
    out
}

/// Largest `|a − n| / max(|a|, |n|)` between the analytic gradient and
/// central differences of the loss with step `h`; both zero counts as 0.
pub fn max_gradient_error(w: &NetworkWeights<f64>, ds: &PredictionDataset<f64>, h: f64) -> f64 {
    let (_, grad) = w.loss_and_gradient(ds).unwrap();
    let analytic = flat_parameters(&grad);
    assert_eq!(analytic.len(), w.parameter_count());
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let up = perturbed(w, i, h).loss_and_gradient(ds).unwrap().0;
        let down = perturbed(w, i, -h).loss_and_gradient(ds).unwrap().0;
        let numeric = (up - down) / (2.0 * h);
        let scale = a.abs().max(numeric.abs());
        if scale > 0.0 {
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    worst
}

/// Initial weights for a `tss_width` network with small random biases, so
/// no bias gradient is trivially compared at zero.
pub fn weights_with_biases(tss_width: usize, seed: u64) -> NetworkWeights<f64> {
    let mut w = NetworkWeights::<f64>::init(tss_width, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    for layer in w.layers_mut() {
        for b in &mut layer.bias {
            *b = rng.gen_range(-0.3..0.3);
        }
    }
    w
}

/// `n` rows of non-negative inputs with alternating labels.
pub fn random_rows(tss_width: usize, seed: u64, n: usize) -> PredictionDataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = PredictionDataset::new(tss_width);
    for i in 0..n {
        let tss: Vec<f64> = (0..tss_width).map(|_| rng.gen_range(0.0..1.5)).collect();
        let demo: Vec<f64> = (0..DEMOGRAPHIC_WIDTH)
            .map(|_| rng.gen_range(0.0..1.0))
            .collect();
        ds.push(format!("r{i}"), &tss, &demo, u8::from(i % 2 == 0))
            .unwrap();
    }
    ds
}
