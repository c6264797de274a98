mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use common::{consistent_orders, max_abs_diff, rng};
use seqme::fixtures::{self, EXAMPLE52_BOUNDS, EXAMPLE52_QUERY, EXAMPLE52_SEQUENTIAL};
use seqme::inference::{local_conditionals, markov_violations};
use seqme::solvers::vertices_box_simplex;
use seqme::{
    body_contains, cond_prob, credal_bounds, entropy, global_me_model, joint_of_bn, maxent_box, maxent_hrep,
    maxent_vrep, me_model, select_sequential, select_sequential_direct, verify_imap, CredalNetwork, Halfspace,
    PointBayesNet, Query, SolverConfig,
};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: seqme::Error) -> String {
    e.to_string()
}

fn u_grid(from: u32, to: u32, step: u32) -> Vec<f64> {
    (from..=to).step_by(step as usize).map(|k| k as f64 / 100.0).collect()
}

fn table_selection() -> Outcome {
    let start = Instant::now();
    let net = fixtures::example52();
    let sel = select_sequential(&net, &SolverConfig::default()).map_err(err)?;
    let elapsed = start.elapsed();
    let mut worst = 0.0f64;
    for (child, given, expected) in fixtures::example52_expected_selection() {
        let given = given.parse().map_err(err)?;
        let got = sel
            .bayes_net
            .cpt(child, &given)
            .ok_or_else(|| format!("no table for {child} given {given}"))?;
        worst = worst.max(max_abs_diff(got, &expected));
    }
    check(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("max deviation {worst:.1e}, {elapsed:.2?}"))
}

fn example_query() -> Outcome {
    let net = fixtures::example52();
    let query = Query::parse(EXAMPLE52_QUERY.0, EXAMPLE52_QUERY.1).map_err(err)?;
    let sel = select_sequential(&net, &SolverConfig::default()).map_err(err)?;
    let p = cond_prob(&joint_of_bn(&sel.bayes_net).map_err(err)?, &query).map_err(err)?;
    let b = credal_bounds(&net, &query).map_err(err)?;
    check((p - EXAMPLE52_SEQUENTIAL).abs() <= 1e-9, || format!("sequential {p}"))?;
    check(
        (b.lo - EXAMPLE52_BOUNDS.0).abs() <= 1e-9 && (b.hi - EXAMPLE52_BOUNDS.1).abs() <= 1e-9,
        || format!("bounds [{}, {}]", b.lo, b.hi),
    )?;
    Ok(format!("sequential {p:.12}, bounds [{:.12}, {:.12}]", b.lo, b.hi))
}

fn burglary_invariance() -> Outcome {
    let query = Query::parse("B=b", "A=a").map_err(err)?;
    let mut worst = 0.0f64;
    for u in u_grid(5, 95, 5) {
        let sel = select_sequential(&fixtures::burglary(u).map_err(err)?, &SolverConfig::default()).map_err(err)?;
        let p = cond_prob(&joint_of_bn(&sel.bayes_net).map_err(err)?, &query).map_err(err)?;
        worst = worst.max((p - 0.5).abs());
    }
    check(worst <= 1e-9, || format!("max deviation from 0.5 is {worst:e}"))?;
    Ok(format!("19 values of u, max deviation {worst:.1e}"))
}

fn burglary_global_curve() -> Outcome {
    let start = Instant::now();
    let query = Query::parse("B=b", "A=a").map_err(err)?;
    let mut worst = 0.0f64;
    for u in u_grid(10, 90, 10) {
        let joint = global_me_model(&fixtures::burglary(u).map_err(err)?, &SolverConfig::default()).map_err(err)?;
        let p = cond_prob(&joint, &query).map_err(err)?;
        let expected = fixtures::burglary_global_closed_form(u);
        worst = worst.max((p - expected).abs());
    }
    let elapsed = start.elapsed();
    check(worst <= 1e-4, || format!("max deviation {worst:e}"))?;
    check(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("9 values of u, max deviation {worst:.1e}, {elapsed:.2?}"))
}

fn point_trees_global() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let net = common::point_tree(&mut r);
        let product = joint_of_bn(&PointBayesNet::new(net.clone()).map_err(err)?).map_err(err)?;
        let global = global_me_model(&net, &SolverConfig::default()).map_err(|e| format!("tree {i}: {e}"))?;
        let d = global.linf_distance(&product).map_err(err)?;
        check(d <= 1e-5, || format!("tree {i}: distance {d:e}"))?;
        worst = worst.max(d);
    }
    Ok(format!("50 trees, max distance {worst:.1e}"))
}

fn mixed_networks() -> Vec<CredalNetwork> {
    let mut r = rng(6);
    (0..30).map(|_| common::mixed_network(&mut r)).collect()
}

fn direct_chain_agreement() -> Outcome {
    let config = SolverConfig::default();
    let mut worst = 0.0f64;
    let mut orders = 0;
    for (i, net) in mixed_networks().iter().enumerate() {
        let sel = select_sequential(net, &config).map_err(|e| format!("network {i}: {e}"))?;
        let joint = joint_of_bn(&sel.bayes_net).map_err(err)?;
        for order in consistent_orders(net) {
            let direct = select_sequential_direct(net, &order, &config)
                .map_err(|e| format!("network {i}, order {order:?}: {e}"))?;
            let d = direct.linf_distance(&joint).map_err(err)?;
            check(d <= 1e-5, || format!("network {i}, order {order:?}: distance {d:e}"))?;
            worst = worst.max(d);
            orders += 1;
        }
    }
    Ok(format!("30 networks, {orders} orderings, max distance {worst:.1e}"))
}

fn membership() -> Outcome {
    let config = SolverConfig::default();
    let mut rows = 0;
    for (i, net) in mixed_networks().iter().enumerate() {
        let sel = select_sequential(net, &config).map_err(err)?;
        for t in net.tables() {
            let row = sel.bayes_net.cpt(&t.child, &t.given).ok_or("missing selected row")?;
            check(body_contains(&t.body, row, 1e-9).map_err(err)?, || {
                format!("network {i}: {} given {} selected {row:?} outside its set", t.child, t.given)
            })?;
            rows += 1;
        }
        let joint = joint_of_bn(&sel.bayes_net).map_err(err)?;
        let v = markov_violations(&joint, net, 1e-8).map_err(err)?;
        check(v.is_empty(), || format!("network {i}: independence violations {v:?}"))?;
    }
    Ok(format!("{rows} selected rows inside their sets, no independence violations"))
}

fn imap_suite() -> Outcome {
    let mut r = rng(8);
    let mut separated = 0;
    for i in 0..30 {
        let kb = common::satisfiable_kb(&mut r);
        let joint = me_model(&kb, &SolverConfig::default()).map_err(|e| format!("kb {i}: {e}"))?;
        let report = verify_imap(&kb, &joint, 256, 1e-5).map_err(err)?;
        check(report.violations.is_empty(), || format!("kb {i}: {:?}", report.violations))?;
        separated += report.separated;
    }
    Ok(format!("30 knowledge bases, {separated} separated triples, no violations"))
}

fn collider_witness() -> Outcome {
    let net = fixtures::collider_witness();
    check(!net.is_tree(), || "witness is a tree".into())?;
    let product = joint_of_bn(&PointBayesNet::new(net.clone()).map_err(err)?).map_err(err)?;
    let global = global_me_model(&net, &SolverConfig::default()).map_err(err)?;
    let d = global.linf_distance(&product).map_err(err)?;
    check(d > 1e-3, || format!("distance only {d:e}"))?;
    Ok(format!("distance {d:.4e}"))
}

fn credal_trees() -> Outcome {
    let mut r = rng(10);
    let mut rows = 0;
    for i in 0..20 {
        let net = common::interval_tree(&mut r);
        let joint = global_me_model(&net, &SolverConfig::default()).map_err(|e| format!("tree {i}: {e}"))?;
        let v = markov_violations(&joint, &net, 1e-5).map_err(err)?;
        check(v.is_empty(), || format!("tree {i}: independence violations {v:?}"))?;
        for (t, row) in local_conditionals(&joint, &net).map_err(err)? {
            let Some(row) = row else { continue };
            check(body_contains(&t.body, &row, 1e-5).map_err(err)?, || {
                format!("tree {i}: {} given {} extracted {row:?} outside its interval", t.child, t.given)
            })?;
            rows += 1;
        }
    }
    Ok(format!("20 trees, {rows} extracted rows inside their intervals"))
}

fn solver_agreement() -> Outcome {
    let config = SolverConfig::default();
    let mut r = rng(11);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let d = r.gen_range(2..=6);
        let (l, u) = common::random_box(&mut r, d);
        let by_box = maxent_box(&l, &u, &config).map_err(err)?;
        let verts = vertices_box_simplex(&l, &u).map_err(err)?;
        let by_vrep = maxent_vrep(&verts, &config).map_err(|e| format!("box {i}: {e}"))?;
        let halfspaces = box_halfspaces(&l, &u);
        let by_hrep = maxent_hrep(&halfspaces, d, &config).map_err(|e| format!("box {i}: {e}"))?;
        let diff = max_abs_diff(&by_box.probs, &by_vrep.probs).max(max_abs_diff(&by_box.probs, &by_hrep.probs));
        check(diff <= 1e-8, || format!("box {i} (l={l:?}, u={u:?}): solvers differ by {diff:e}"))?;
        worst = worst.max(diff);
        let best = by_box.entropy.min(by_vrep.entropy).min(by_hrep.entropy);
        let mut sampled = 0;
        while sampled < 1000 {
            if let Some(p) = sample_box_simplex(&mut r, &l, &u) {
                check(entropy(&p) <= best + 1e-12, || format!("box {i}: sample {p:?} has higher entropy"))?;
                sampled += 1;
            }
        }
    }
    Ok(format!("200 boxes, max disagreement {worst:.1e}"))
}

fn box_halfspaces(l: &[f64], u: &[f64]) -> Vec<Halfspace> {
    let d = l.len();
    let mut hs = Vec::with_capacity(2 * d);
    for j in 0..d {
        let mut a = vec![0.0; d];
        a[j] = 1.0;
        hs.push(Halfspace::new(a.clone(), u[j]));
        a[j] = -1.0;
        hs.push(Halfspace::new(a, -l[j]));
    }
    hs
}

/// Uniform over the first `d - 1` coordinates of the box, rejected unless the remainder fits.
fn sample_box_simplex(r: &mut impl Rng, l: &[f64], u: &[f64]) -> Option<Vec<f64>> {
    let d = l.len();
    let mut p: Vec<f64> = (0..d - 1)
        .map(|j| if u[j] > l[j] { r.gen_range(l[j]..=u[j]) } else { l[j] })
        .collect();
    let last = 1.0 - p.iter().sum::<f64>();
    (last >= l[d - 1] && last <= u[d - 1]).then(|| {
        p.push(last);
        p
    })
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("example selection rows", table_selection),
        ("example query and bounds", example_query),
        ("burglary sequential invariance", burglary_invariance),
        ("burglary global curve", burglary_global_curve),
        ("point trees match global model", point_trees_global),
        ("direct chain agrees for every order", direct_chain_agreement),
        ("selected rows and independencies", membership),
        ("co-occurrence graph is an I-map", imap_suite),
        ("collider witness", collider_witness),
        ("credal trees under global model", credal_trees),
        ("local solver agreement", solver_agreement),
    ];
    let total = Instant::now();
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{:.2?}]", n + 1, start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{:.2?}]", n + 1, start.elapsed());
            }
        }
    }
    println!("{} of {} criteria passed in {:.2?}", criteria.len() - failed, criteria.len(), total.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
