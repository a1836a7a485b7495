//! Shared test support: an enumeration oracle for the four U-statistics,
//! written directly from the kernel definitions and independent of the
//! engine code paths (local test functions over raw slices, recursive tuple
//! enumeration, index-juggling symmetrization).

#![allow(dead_code)]

use gms_core::family::{FamilyKind, TestFamily};
use gms_core::metric::{MetricSpace, Point};
use gms_core::sampling::PairedSample;

pub type Row = (Vec<f64>, Vec<f64>);
pub type TestFn<'a> = &'a dyn Fn(&[&[f64]], &[f64]) -> f64;

pub fn phi(j: u8, m: usize, t: TestFn, rows: &[Row], tuple: &[usize]) -> f64 {
    let params: Vec<&[f64]> = tuple[..m].iter().map(|&i| rows[i].0.as_slice()).collect();
    let unfrozen = |k: usize| rows[tuple[k]].0.as_slice();
    let frozen = |k: usize| rows[tuple[k]].1.as_slice();
    match j {
        1 => t(&params, unfrozen(m)) * t(&params, frozen(m)),
        2 => t(&params, unfrozen(m)) * t(&params, frozen(m + 1)),
        3 => t(&params, unfrozen(m)).powi(2),
        4 => t(&params, unfrozen(m)) * t(&params, unfrozen(m + 1)),
        _ => unreachable!(),
    }
}

pub fn permutations_of(k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations_of(k - 1) {
        for pos in 0..k {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

pub fn phi_sym(j: u8, m: usize, t: TestFn, rows: &[Row], tuple: &[usize]) -> f64 {
    let perms = permutations_of(tuple.len());
    let mut acc = 0.0;
    for p in &perms {
        let permuted: Vec<usize> = p.iter().map(|&k| tuple[k]).collect();
        acc += phi(j, m, t, rows, &permuted);
    }
    acc / perms.len() as f64
}

pub fn for_each_combination(n: usize, order: usize, visit: &mut dyn FnMut(&[usize])) {
    fn recurse(
        start: usize,
        n: usize,
        order: usize,
        tuple: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if tuple.len() == order {
            visit(tuple);
            return;
        }
        for i in start..n {
            tuple.push(i);
            recurse(i + 1, n, order, tuple, visit);
            tuple.pop();
        }
    }
    let mut tuple = Vec::new();
    recurse(0, n, order, &mut tuple, visit);
}

pub fn kernel_m(j: u8, m: usize) -> usize {
    if j == 1 || j == 3 {
        m + 1
    } else {
        m + 2
    }
}

/// U_{j,N}: binomial-normalized sum of phi_j^s over increasing tuples.
pub fn brute_force_ustat(j: u8, m: usize, t: TestFn, rows: &[Row]) -> f64 {
    let (mean, _) = brute_force_tuple_moments(j, m, t, rows);
    mean
}

/// Mean and population variance of phi_j^s over all combinations.
pub fn brute_force_tuple_moments(j: u8, m: usize, t: TestFn, rows: &[Row]) -> (f64, f64) {
    let order = kernel_m(j, m);
    let mut vals = Vec::new();
    for_each_combination(rows.len(), order, &mut |tup| {
        vals.push(phi_sym(j, m, t, rows, tup));
    });
    let k = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / k;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
    (mean, var)
}

/// Same integral from the raw kernels averaged over ordered distinct tuples.
pub fn brute_force_raw_ordered(j: u8, m: usize, t: TestFn, rows: &[Row]) -> f64 {
    let order = kernel_m(j, m);
    let n = rows.len();
    let mut total = 0.0;
    let mut count = 0usize;
    fn recurse(n: usize, order: usize, tuple: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if tuple.len() == order {
            visit(tuple);
            return;
        }
        for i in 0..n {
            if !tuple.contains(&i) {
                tuple.push(i);
                recurse(n, order, tuple, visit);
                tuple.pop();
            }
        }
    }
    let mut tuple = Vec::new();
    recurse(n, order, &mut tuple, &mut |tup| {
        total += phi(j, m, t, rows, tup);
        count += 1;
    });
    total / count as f64
}

pub fn synthetic_rows(n: usize, dim: usize, salt: f64) -> Vec<Row> {
    (0..n)
        .map(|i| {
            let z: Vec<f64> =
                (0..dim).map(|d| ((i * 7 + d * 3) as f64 * 0.613 + salt).sin() + 1.5).collect();
            let w: Vec<f64> =
                (0..dim).map(|d| ((i * 11 + d * 5) as f64 * 0.371 - salt).cos() + 1.5).collect();
            (z, w)
        })
        .collect()
}

pub fn to_sample(rows: &[Row], scalar: bool) -> PairedSample {
    if scalar {
        let pairs: Vec<(f64, f64)> = rows.iter().map(|(z, w)| (z[0], w[0])).collect();
        PairedSample::from_scalar_pairs(&pairs, 0)
    } else {
        let mut s = PairedSample::from_scalar_pairs(&[(0.0, 0.0)], 0);
        s.rows = rows
            .iter()
            .map(|(z, w)| (Point::Vector(z.clone()), Point::Vector(w.clone())))
            .collect();
        s
    }
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub struct Case {
    pub name: &'static str,
    pub family: TestFamily,
    pub m: usize,
    pub dim: usize,
    pub scalar: bool,
    pub t: Box<dyn Fn(&[&[f64]], &[f64]) -> f64>,
}

pub fn oracle_cases() -> Vec<Case> {
    vec![
        Case {
            name: "sobol m=0",
            family: TestFamily::new(FamilyKind::SobolValue, MetricSpace::Scalar).unwrap(),
            m: 0,
            dim: 1,
            scalar: true,
            t: Box::new(|_a, x| x[0]),
        },
        Case {
            name: "cvm m=1",
            family: TestFamily::new(FamilyKind::HalfSpaceCvm, MetricSpace::Scalar).unwrap(),
            m: 1,
            dim: 1,
            scalar: true,
            t: Box::new(|a, x| if x[0] <= a[0][0] { 1.0 } else { 0.0 }),
        },
        Case {
            name: "metric ball m=2",
            family: TestFamily::new(FamilyKind::MetricBall, MetricSpace::Vector { dim: 2 })
                .unwrap(),
            m: 2,
            dim: 2,
            scalar: false,
            t: Box::new(|a, x| {
                if euclid(x, a[0]) <= euclid(a[0], a[1]) {
                    1.0
                } else {
                    0.0
                }
            }),
        },
        Case {
            name: "midpoint ball m=2",
            family: TestFamily::new(FamilyKind::MidpointBall, MetricSpace::Vector { dim: 2 })
                .unwrap(),
            m: 2,
            dim: 2,
            scalar: false,
            t: Box::new(|a, x| {
                let mid: Vec<f64> = a[0].iter().zip(a[1]).map(|(u, v)| 0.5 * (u + v)).collect();
                if euclid(x, &mid) <= 0.5 * euclid(a[0], a[1]) {
                    1.0
                } else {
                    0.0
                }
            }),
        },
        Case {
            name: "intersection ball m=2",
            family: TestFamily::new(FamilyKind::IntersectionBall, MetricSpace::Vector { dim: 2 })
                .unwrap(),
            m: 2,
            dim: 2,
            scalar: false,
            t: Box::new(|a, x| {
                let r = euclid(a[0], a[1]);
                if euclid(x, a[0]).max(euclid(x, a[1])) <= r {
                    1.0
                } else {
                    0.0
                }
            }),
        },
    ]
}
