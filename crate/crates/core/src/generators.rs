//! Instance generators: the pig farm problem, the N-monitoring problem and
//! small random diagrams for property checks.
//!
//! Seeded pig farm instances perturb every chance-node table row by adding
//! independent `U[0, 0.3]` noise per entry and renormalizing; utilities and
//! the deterministic value tables stay fixed. N-monitoring tables are drawn
//! from a seeded monotone recipe (see [`NMonitoringSpec`]). Both schemes
//! are interpretations of "randomly generated instances" and are reported
//! as such by the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagram::{DiagramBuilder, InfluenceDiagram, NodeId, NodeKind, Strategy};

pub const PERTURBATION_WIDTH: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct PigFarmSpec {
    /// Number of treatment decisions.
    pub periods: usize,
    pub price_healthy: f64,
    pub price_ill: f64,
    pub injection_cost: f64,
    /// P(positive | ill).
    pub sensitivity: f64,
    /// P(negative | healthy).
    pub specificity: f64,
    /// P(healthy next | ill, treated).
    pub heal_treated: f64,
    /// P(healthy next | ill, untreated).
    pub heal_untreated: f64,
    /// P(ill next | healthy, treated).
    pub sicken_treated: f64,
    /// P(ill next | healthy, untreated).
    pub sicken_untreated: f64,
    pub prior_ill: f64,
    pub seed: Option<u64>,
}

impl Default for PigFarmSpec {
    fn default() -> Self {
        Self {
            periods: 3,
            price_healthy: 1000.0,
            price_ill: 300.0,
            injection_cost: 100.0,
            sensitivity: 0.9,
            specificity: 0.8,
            heal_treated: 0.5,
            heal_untreated: 0.1,
            sicken_treated: 0.1,
            sicken_untreated: 0.2,
            prior_ill: 0.1,
            seed: None,
        }
    }
}

impl PigFarmSpec {
    pub fn with_periods(periods: usize) -> Self {
        Self {
            periods,
            ..Default::default()
        }
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

fn perturb(rng: &mut ChaCha8Rng, table: &mut [f64], width: usize) {
    for row in table.chunks_mut(width) {
        for v in row.iter_mut() {
            *v += rng.gen_range(0.0..PERTURBATION_WIDTH);
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
}

/// Builds `H1,T1,D1,V1, ..., H_N,T_N,D_N,V_N, H_{N+1},V_{N+1}` in that
/// declaration order.
pub fn pig_farm(spec: &PigFarmSpec) -> InfluenceDiagram {
    assert!(spec.periods >= 1, "pig farm needs at least one period");
    let mut rng = spec.seed.map(ChaCha8Rng::seed_from_u64);
    let mut noisy = |mut t: Vec<f64>| {
        if let Some(r) = rng.as_mut() {
            perturb(r, &mut t, 2);
        }
        t
    };
    let health = ["healthy", "ill"];
    let test = ["positive", "negative"];
    let treat = ["treat", "no_treat"];
    let identity = vec![1.0, 0.0, 0.0, 1.0];

    let mut b = DiagramBuilder::new();
    b.chance("H1", health, [], noisy(vec![1.0 - spec.prior_ill, spec.prior_ill]));
    for k in 1..=spec.periods {
        let h = format!("H{k}");
        let t = format!("T{k}");
        let d = format!("D{k}");
        b.chance(
            t.clone(),
            test.map(String::from),
            [h.clone()],
            noisy(vec![
                1.0 - spec.specificity,
                spec.specificity,
                spec.sensitivity,
                1.0 - spec.sensitivity,
            ]),
        );
        b.decision(d.clone(), treat.map(String::from), [t]);
        b.value(
            format!("V{k}"),
            treat.map(String::from),
            [d.clone()],
            identity.clone(),
            vec![-spec.injection_cost, 0.0],
        );
        b.chance(
            format!("H{}", k + 1),
            health.map(String::from),
            [h, d],
            noisy(vec![
                1.0 - spec.sicken_treated,
                spec.sicken_treated,
                1.0 - spec.sicken_untreated,
                spec.sicken_untreated,
                spec.heal_treated,
                1.0 - spec.heal_treated,
                spec.heal_untreated,
                1.0 - spec.heal_untreated,
            ]),
        );
    }
    let n = spec.periods + 1;
    b.value(
        format!("V{n}"),
        health.map(String::from),
        [format!("H{n}")],
        identity,
        vec![spec.price_healthy, spec.price_ill],
    );
    b.build().expect("pig farm names resolve")
}

/// N-monitoring: load `L`, reports `R_i | L`, fortification decisions
/// `A_i | R_i`, failure `F | L, A_1..A_N` and one value node
/// `T | F, A_1..A_N`. Declared in the order `L, R1, A1, ..., RN, AN, F, T`.
///
/// Tables not overridden are drawn from the seed:
/// - load prior: normalized `U(0,1)` weights;
/// - reports: weight `exp(-sharpness_i * |r/(kR-1) - l/(kL-1)|)`, sharpness `U(1,4)`;
/// - failure: `p = base * (l/(kL-1)) * prod_i (1 - efficacy_i * a_i/(kA-1))`,
///   base `U(0.5,1)`, efficacy `U(0.2,0.6)`; the `kF` failure states count
///   surviving margins as `Binomial(kF-1, 1-p)`, state 0 being outright failure;
/// - utility: `reward * f/(kF-1) - sum_i cost_i * a_i/(kA-1)`, cost `U(cost_lo, cost_hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NMonitoringSpec {
    pub monitors: usize,
    pub load_states: usize,
    pub report_states: usize,
    pub action_states: usize,
    pub failure_states: usize,
    pub seed: u64,
    pub reward: f64,
    pub cost_lo: f64,
    pub cost_hi: f64,
    pub load_prior: Option<Vec<f64>>,
    pub report_sharpness: Option<Vec<f64>>,
    pub base_failure: Option<f64>,
    pub efficacies: Option<Vec<f64>>,
    pub costs: Option<Vec<f64>>,
}

impl NMonitoringSpec {
    pub fn new(monitors: usize, seed: u64) -> Self {
        Self {
            monitors,
            load_states: 2,
            report_states: 2,
            action_states: 2,
            failure_states: 2,
            seed,
            reward: 100.0,
            cost_lo: 10.0,
            cost_hi: 40.0,
            load_prior: None,
            report_sharpness: None,
            base_failure: None,
            efficacies: None,
            costs: None,
        }
    }
}

fn frac(i: usize, k: usize) -> f64 {
    if k <= 1 {
        0.0
    } else {
        i as f64 / (k - 1) as f64
    }
}

fn binomial_row(trials: usize, p: f64) -> Vec<f64> {
    let mut row = Vec::with_capacity(trials + 1);
    let mut coef = 1.0;
    for k in 0..=trials {
        if k > 0 {
            coef = coef * (trials - k + 1) as f64 / k as f64;
        }
        row.push(coef * p.powi(k as i32) * (1.0 - p).powi((trials - k) as i32));
    }
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
    row
}

pub fn n_monitoring(spec: &NMonitoringSpec) -> InfluenceDiagram {
    let n = spec.monitors;
    assert!(n >= 1, "N-monitoring needs at least one monitor");
    let (kl, kr, ka, kf) = (
        spec.load_states,
        spec.report_states,
        spec.action_states,
        spec.failure_states,
    );
    assert!(kl >= 1 && kr >= 1 && ka >= 1 && kf >= 2, "state counts out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let load_prior = spec.load_prior.clone().unwrap_or_else(|| {
        let w: Vec<f64> = (0..kl).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    });
    let sharpness = spec
        .report_sharpness
        .clone()
        .unwrap_or_else(|| (0..n).map(|_| rng.gen_range(1.0..4.0)).collect());
    let base = spec.base_failure.unwrap_or_else(|| rng.gen_range(0.5..1.0));
    let efficacies = spec
        .efficacies
        .clone()
        .unwrap_or_else(|| (0..n).map(|_| rng.gen_range(0.2..0.6)).collect());
    let costs = spec
        .costs
        .clone()
        .unwrap_or_else(|| (0..n).map(|_| rng.gen_range(spec.cost_lo..spec.cost_hi)).collect());

    let labels = |prefix: &str, k: usize| -> Vec<String> { (0..k).map(|i| format!("{prefix}{i}")).collect() };
    let mut b = DiagramBuilder::new();
    b.chance("L", labels("l", kl), Vec::<String>::new(), load_prior);
    for i in 1..=n {
        let mut table = Vec::with_capacity(kl * kr);
        for l in 0..kl {
            let w: Vec<f64> = (0..kr)
                .map(|r| (-sharpness[i - 1] * (frac(r, kr) - frac(l, kl)).abs()).exp())
                .collect();
            let s: f64 = w.iter().sum();
            table.extend(w.into_iter().map(|v| v / s));
        }
        b.chance(format!("R{i}"), labels("r", kr), vec!["L".to_string()], table);
        b.decision(format!("A{i}"), labels("a", ka), vec![format!("R{i}")]);
    }

    let actions: Vec<String> = (1..=n).map(|i| format!("A{i}")).collect();
    let mut f_parents = vec!["L".to_string()];
    f_parents.extend(actions.iter().cloned());
    let action_configs = ka.pow(n as u32);
    let mut f_table = Vec::with_capacity(kl * action_configs * kf);
    let mut digits = vec![0; n];
    for l in 0..kl {
        for cfg in 0..action_configs {
            decode_digits(cfg, ka, &mut digits);
            let mut p = base * frac(l, kl);
            for (i, &a) in digits.iter().enumerate() {
                p *= 1.0 - efficacies[i] * frac(a, ka);
            }
            f_table.extend(binomial_row(kf - 1, 1.0 - p.clamp(0.0, 1.0)));
        }
    }
    b.chance("F", labels("f", kf), f_parents, f_table);

    let mut t_parents = vec!["F".to_string()];
    t_parents.extend(actions);
    let t_states = kf * action_configs;
    let mut t_labels = Vec::with_capacity(t_states);
    let mut utilities = Vec::with_capacity(t_states);
    for f in 0..kf {
        for cfg in 0..action_configs {
            decode_digits(cfg, ka, &mut digits);
            let mut label = format!("f{f}");
            let mut u = spec.reward * frac(f, kf);
            for (i, &a) in digits.iter().enumerate() {
                label.push_str(&format!(",a{a}"));
                u -= costs[i] * frac(a, ka);
            }
            t_labels.push(label);
            utilities.push(u);
        }
    }
    let mut t_table = vec![0.0; t_states * t_states];
    for s in 0..t_states {
        t_table[s * t_states + s] = 1.0;
    }
    b.value("T", t_labels, t_parents, t_table, utilities);
    b.build().expect("N-monitoring names resolve")
}

fn decode_digits(mut cfg: usize, radix: usize, out: &mut [usize]) {
    for d in out.iter_mut().rev() {
        *d = cfg % radix;
        cfg /= radix;
    }
}

/// Shape limits for [`random_diagram`].
#[derive(Debug, Clone)]
pub struct RandomDiagramSpec {
    pub max_nodes: usize,
    pub max_states: usize,
    pub max_value_nodes: usize,
    pub max_parents: usize,
    pub max_decision_parents: usize,
    pub decision_prob: f64,
    pub arc_prob: f64,
}

impl Default for RandomDiagramSpec {
    fn default() -> Self {
        Self {
            max_nodes: 10,
            max_states: 3,
            max_value_nodes: 3,
            max_parents: 3,
            max_decision_parents: 2,
            decision_prob: 0.3,
            arc_prob: 0.4,
        }
    }
}

fn random_rows(rng: &mut ChaCha8Rng, rows: usize, width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * width);
    for _ in 0..rows {
        let mut w: Vec<f64> = (0..width)
            .map(|_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.01..1.0) })
            .collect();
        if w.iter().all(|&v| v == 0.0) {
            w[rng.gen_range(0..width)] = 1.0;
        }
        let s: f64 = w.iter().sum();
        out.extend(w.into_iter().map(|v| v / s));
    }
    out
}

/// A random valid diagram with at least one value node. Value nodes are
/// declared right after their last parent so declaration order varies.
pub fn random_diagram(seed: u64, spec: &RandomDiagramSpec) -> InfluenceDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=spec.max_nodes.max(2));
    let values = rng.gen_range(1..=spec.max_value_nodes.min(n - 1).max(1));
    let inner = n - values;

    struct Pending {
        name: String,
        kind: NodeKind,
        states: usize,
        parents: Vec<usize>,
    }
    let mut inner_nodes: Vec<Pending> = Vec::with_capacity(inner);
    for i in 0..inner {
        let kind = if rng.gen_bool(spec.decision_prob) {
            NodeKind::Decision
        } else {
            NodeKind::Chance
        };
        let cap = if kind == NodeKind::Decision {
            spec.max_decision_parents
        } else {
            spec.max_parents
        };
        let mut parents: Vec<usize> = (0..i).filter(|_| rng.gen_bool(spec.arc_prob)).collect();
        while parents.len() > cap {
            parents.remove(rng.gen_range(0..parents.len()));
        }
        let lo = if kind == NodeKind::Decision { 2 } else { 1 };
        let states = rng.gen_range(lo..=spec.max_states.max(lo));
        let prefix = if kind == NodeKind::Decision { "D" } else { "C" };
        inner_nodes.push(Pending {
            name: format!("{prefix}{i}"),
            kind,
            states,
            parents,
        });
    }
    let mut value_nodes: Vec<Pending> = (0..values)
        .map(|v| {
            let mut parents: Vec<usize> = (0..inner).filter(|_| rng.gen_bool(spec.arc_prob)).collect();
            if parents.is_empty() && inner > 0 {
                parents.push(rng.gen_range(0..inner));
            }
            while parents.len() > 2 {
                parents.remove(rng.gen_range(0..parents.len()));
            }
            Pending {
                name: format!("V{v}"),
                kind: NodeKind::Value,
                states: rng.gen_range(1..=spec.max_states.max(1)),
                parents,
            }
        })
        .collect();
    value_nodes.sort_by_key(|v| v.parents.iter().max().copied());

    let mut b = DiagramBuilder::new();
    let emit = |b: &mut DiagramBuilder, p: &Pending, rng: &mut ChaCha8Rng| {
        let parents: Vec<String> = p.parents.iter().map(|&i| inner_nodes[i].name.clone()).collect();
        let states: Vec<String> = (0..p.states).map(|s| format!("s{s}")).collect();
        let rows: usize = p.parents.iter().map(|&i| inner_nodes[i].states).product();
        match p.kind {
            NodeKind::Decision => {
                b.decision(p.name.clone(), states, parents);
            }
            NodeKind::Chance => {
                b.chance(p.name.clone(), states, parents, random_rows(rng, rows, p.states));
            }
            NodeKind::Value => {
                let utilities = (0..p.states)
                    .map(|_| (rng.gen_range(-40.0..40.0_f64)).round() / 4.0)
                    .collect();
                b.value(p.name.clone(), states, parents, random_rows(rng, rows, p.states), utilities);
            }
        }
    };
    let mut vi = 0;
    for v in value_nodes.iter().take_while(|v| v.parents.is_empty()) {
        emit(&mut b, v, &mut rng);
        vi += 1;
    }
    for (i, node) in inner_nodes.iter().enumerate().take(inner) {
        emit(&mut b, node, &mut rng);
        while vi < value_nodes.len() && value_nodes[vi].parents.iter().max() == Some(&i) {
            emit(&mut b, &value_nodes[vi], &mut rng);
            vi += 1;
        }
    }
    b.build().expect("random diagram names resolve")
}

/// Uniformly random deterministic strategy.
pub fn random_strategy(d: &InfluenceDiagram, seed: u64) -> Strategy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Strategy::from_fn(d, |dec: NodeId, _| rng.gen_range(0..d.num_states(dec))).expect("in-range strategy")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pig_farm_one_period() {
        let d = pig_farm(&PigFarmSpec::with_periods(1));
        let names: Vec<&str> = d.ids().map(|j| d.name(j)).collect();
        assert_eq!(names, ["H1", "T1", "D1", "V1", "H2", "V2"]);
        assert!(d.validate().is_empty());
    }

    #[test]
    fn pig_farm_three_periods_declared_order() {
        let d = pig_farm(&PigFarmSpec::default());
        assert!(d.validate().is_empty());
        let order: Vec<&str> = d.topological_order().unwrap().into_iter().map(|j| d.name(j)).collect();
        assert_eq!(
            order,
            ["H1", "T1", "D1", "V1", "H2", "T2", "D2", "V2", "H3", "T3", "D3", "V3", "H4", "V4"]
        );
        assert_eq!(d.strategy_count(), 64);
    }

    #[test]
    fn seeded_pig_farm_is_reproducible() {
        let a = pig_farm(&PigFarmSpec::default().seeded(42));
        let b = pig_farm(&PigFarmSpec::default().seeded(42));
        let c = pig_farm(&PigFarmSpec::default().seeded(43));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.validate().is_empty());
        // Value tables are never perturbed.
        let v = a.id("V4").unwrap();
        assert_eq!(a.cpt(v).unwrap(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn n_monitoring_shapes() {
        for n in 1..=3 {
            let d = n_monitoring(&NMonitoringSpec::new(n, 5));
            assert!(d.validate().is_empty(), "{:?}", d.validate());
            assert_eq!(d.len(), 2 * n + 3);
            assert_eq!(d, n_monitoring(&NMonitoringSpec::new(n, 5)));
        }
        let d = n_monitoring(&NMonitoringSpec::new(2, 1));
        assert_eq!(d.strategy_count(), 16);
        let mut wide = NMonitoringSpec::new(2, 3);
        wide.load_states = 3;
        wide.action_states = 3;
        wide.failure_states = 3;
        assert!(n_monitoring(&wide).validate().is_empty());
    }

    #[test]
    fn random_diagrams_are_valid() {
        let spec = RandomDiagramSpec::default();
        for seed in 0..300 {
            let d = random_diagram(seed, &spec);
            assert!(d.validate().is_empty(), "seed {seed}: {:?}", d.validate());
            assert!(d.len() <= 10);
            assert!(!d.value_nodes().is_empty());
            let _ = random_strategy(&d, seed);
        }
    }
}
