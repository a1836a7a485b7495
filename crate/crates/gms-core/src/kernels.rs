//! The four Pick-Freeze kernels and their symmetrized versions.
//!
//! With pairs z_i = (z_i, z_i^u) and parameters a = (z_1, ..., z_m) taken
//! from the unfrozen coordinates of the first m pairs:
//!
//!   phi_1 = T_a(z_{m+1}) T_a(z_{m+1}^u)      order m+1
//!   phi_2 = T_a(z_{m+1}) T_a(z_{m+2}^u)      order m+2
//!   phi_3 = T_a(z_{m+1})^2                   order m+1
//!   phi_4 = T_a(z_{m+1}) T_a(z_{m+2})        order m+2

use crate::error::{GmsError, Result};
use crate::family::TestFamily;
use crate::metric::Point;

/// Kernel order M(j) for a family with m parameters:
/// M(1) = M(3) = m+1, M(2) = M(4) = m+2.
pub fn kernel_order(j: u8, m: usize) -> usize {
    match j {
        1 | 3 => m + 1,
        2 | 4 => m + 2,
        _ => panic!("kernel index must be 1..=4"),
    }
}

pub(crate) fn check_kernel_index(j: u8) -> Result<()> {
    if (1..=4).contains(&j) {
        Ok(())
    } else {
        Err(GmsError::InvalidArgument(format!("kernel index {j} not in 1..=4")))
    }
}

/// Raw kernel phi_j on an ordered tuple of M(j) sample pairs.
pub fn kernel_phi(j: u8, family: &TestFamily, tuple: &[(Point, Point)]) -> Result<f64> {
    let refs: Vec<&(Point, Point)> = tuple.iter().collect();
    kernel_phi_refs(j, family, &refs)
}

pub(crate) fn kernel_phi_refs(j: u8, family: &TestFamily, tuple: &[&(Point, Point)]) -> Result<f64> {
    check_kernel_index(j)?;
    let m = family.m();
    let expected = kernel_order(j, m);
    if tuple.len() != expected {
        return Err(GmsError::Arity { kernel: j, expected, got: tuple.len() });
    }
    let a: Vec<&Point> = tuple[..m].iter().map(|p| &p.0).collect();
    let t = |x: &Point| family.eval(&a, x);
    match j {
        1 => Ok(t(&tuple[m].0)? * t(&tuple[m].1)?),
        2 => Ok(t(&tuple[m].0)? * t(&tuple[m + 1].1)?),
        3 => {
            let v = t(&tuple[m].0)?;
            Ok(v * v)
        }
        4 => Ok(t(&tuple[m].0)? * t(&tuple[m + 1].0)?),
        _ => unreachable!(),
    }
}

// Permutation tables for tuple sizes 1..=4 (lexicographic).
const PERMS_1: [[usize; 1]; 1] = [[0]];
const PERMS_2: [[usize; 2]; 2] = [[0, 1], [1, 0]];
const PERMS_3: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];
const PERMS_4: [[usize; 4]; 24] = [
    [0, 1, 2, 3],
    [0, 1, 3, 2],
    [0, 2, 1, 3],
    [0, 2, 3, 1],
    [0, 3, 1, 2],
    [0, 3, 2, 1],
    [1, 0, 2, 3],
    [1, 0, 3, 2],
    [1, 2, 0, 3],
    [1, 2, 3, 0],
    [1, 3, 0, 2],
    [1, 3, 2, 0],
    [2, 0, 1, 3],
    [2, 0, 3, 1],
    [2, 1, 0, 3],
    [2, 1, 3, 0],
    [2, 3, 0, 1],
    [2, 3, 1, 0],
    [3, 0, 1, 2],
    [3, 0, 2, 1],
    [3, 1, 0, 2],
    [3, 1, 2, 0],
    [3, 2, 0, 1],
    [3, 2, 1, 0],
];

/// Number of permutations of a tuple of the given size.
pub(crate) fn factorial(len: usize) -> usize {
    (1..=len).product()
}

/// Visit every permutation of {0..len-1}, len in 1..=4.
pub(crate) fn for_each_permutation<E>(
    len: usize,
    mut f: impl FnMut(&[usize]) -> std::result::Result<(), E>,
) -> std::result::Result<(), E> {
    match len {
        1 => PERMS_1.iter().try_for_each(|p| f(p)),
        2 => PERMS_2.iter().try_for_each(|p| f(p)),
        3 => PERMS_3.iter().try_for_each(|p| f(p)),
        4 => PERMS_4.iter().try_for_each(|p| f(p)),
        _ => panic!("tuple size {len} out of supported range 1..=4"),
    }
}

/// Symmetrized kernel: average of phi_j over all M(j)! orderings of the tuple.
pub fn symmetrize(j: u8, family: &TestFamily, tuple: &[(Point, Point)]) -> Result<f64> {
    let refs: Vec<&(Point, Point)> = tuple.iter().collect();
    symmetrize_refs(j, family, &refs)
}

pub(crate) fn symmetrize_refs(j: u8, family: &TestFamily, tuple: &[&(Point, Point)]) -> Result<f64> {
    check_kernel_index(j)?;
    let m = family.m();
    let expected = kernel_order(j, m);
    if tuple.len() != expected {
        return Err(GmsError::Arity { kernel: j, expected, got: tuple.len() });
    }
    let mut acc = 0.0;
    let mut scratch: Vec<&(Point, Point)> = Vec::with_capacity(expected);
    for_each_permutation(expected, |perm| {
        scratch.clear();
        scratch.extend(perm.iter().map(|&k| tuple[k]));
        acc += kernel_phi_refs(j, family, &scratch)?;
        Ok::<(), GmsError>(())
    })?;
    Ok(acc / factorial(expected) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::FamilyKind;
    use crate::metric::MetricSpace;

    fn sobol() -> TestFamily {
        TestFamily::new(FamilyKind::SobolValue, MetricSpace::Scalar).unwrap()
    }

    fn cvm() -> TestFamily {
        TestFamily::new(FamilyKind::HalfSpaceCvm, MetricSpace::Scalar).unwrap()
    }

    fn pair(z: f64, zu: f64) -> (Point, Point) {
        (Point::Scalar(z), Point::Scalar(zu))
    }

    #[test]
    fn orders() {
        assert_eq!(kernel_order(1, 0), 1);
        assert_eq!(kernel_order(2, 0), 2);
        assert_eq!(kernel_order(3, 1), 2);
        assert_eq!(kernel_order(4, 2), 4);
    }

    #[test]
    fn cvm_phi1_example() {
        // pairs z1=(0.5,0.9), z2=(0.3,0.7): phi1 = 1{0.3<=0.5} * 1{0.7<=0.5} = 0
        let fam = cvm();
        let t = vec![pair(0.5, 0.9), pair(0.3, 0.7)];
        assert_eq!(kernel_phi(1, &fam, &t).unwrap(), 0.0);
    }

    #[test]
    fn sobol_phi_examples() {
        let fam = sobol();
        let t = vec![pair(2.0, 3.0)];
        assert_eq!(kernel_phi(1, &fam, &t).unwrap(), 6.0);
        assert_eq!(kernel_phi(3, &fam, &t).unwrap(), 4.0);
    }

    #[test]
    fn indicator_phi3_idempotent() {
        let fam = cvm();
        for (a, x) in [(0.5, 0.3), (0.5, 0.7), (1.0, 1.0)] {
            let t = vec![pair(a, a), pair(x, x)];
            let v = kernel_phi(3, &fam, &t).unwrap();
            assert_eq!(v, v * v);
        }
    }

    #[test]
    fn sobol_phi2_symmetrized() {
        // z1=(1,2), z2=(3,4): (1*4 + 3*2)/2 = 5
        let fam = sobol();
        let t = vec![pair(1.0, 2.0), pair(3.0, 4.0)];
        assert_eq!(symmetrize(2, &fam, &t).unwrap(), 5.0);
    }

    #[test]
    fn symmetrize_permutation_invariant() {
        let fam = cvm();
        let t = vec![pair(0.4, 0.6), pair(0.1, 0.9), pair(0.5, 0.2)];
        let v0 = symmetrize(2, &fam, &t).unwrap();
        for_each_permutation(3, |perm| {
            let shuffled: Vec<_> = perm.iter().map(|&k| t[k].clone()).collect();
            assert_eq!(symmetrize(2, &fam, &shuffled).unwrap(), v0);
            Ok::<(), GmsError>(())
        })
        .unwrap();
    }

    #[test]
    fn identical_pairs_symmetrize_to_raw() {
        let fam = sobol();
        let t = vec![pair(1.5, 2.5), pair(1.5, 2.5)];
        assert_eq!(
            symmetrize(4, &fam, &t).unwrap(),
            kernel_phi(4, &fam, &t).unwrap()
        );
    }

    #[test]
    fn wrong_arity() {
        let fam = sobol();
        let t = vec![pair(1.0, 1.0), pair(2.0, 2.0)];
        assert!(matches!(
            kernel_phi(1, &fam, &t),
            Err(GmsError::Arity { kernel: 1, expected: 1, got: 2 })
        ));
    }
}
