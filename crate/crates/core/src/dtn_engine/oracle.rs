//! Independent double-precision chain built on the finite-volume radial solver.

use std::collections::BTreeMap;

use super::{levels_within, sqrt_two_pi_f64, EngineError};
use crate::potentials::{bump_phi, PotentialVnm};
use crate::radial::{fd_solve_sampled, FdGrid};

/// Coarse grid size for [`fd_chain_entries`]; the fine grid doubles it.
pub const FD_ORACLE_CELLS: usize = 4000;

fn chain_on_grid(
    grid: &FdGrid,
    energy: f64,
    v: &PotentialVnm,
    degree_max: u32,
) -> Result<BTreeMap<(i64, i64), f64>, EngineError> {
    let eps = v.eps.to_f64();
    let phi: Vec<f64> = grid
        .r
        .iter()
        .map(|&r| bump_phi(&v.bump, [r, 0.0]))
        .collect();
    let s = v.frequency();
    let d = degree_max as i64;
    let mut out = BTreeMap::new();
    for j2 in -d..=d {
        let base = fd_solve_sampled(
            grid,
            j2.unsigned_abs() as u32,
            2,
            energy,
            &vec![0.0; grid.r.len()],
            1.0 / sqrt_two_pi_f64(),
        )?;
        let mut prev = base.u;
        for l in 1..=levels_within(j2, s, degree_max) {
            let f = j2 + l as i64 * s;
            let g: Vec<f64> = prev.iter().zip(&phi).map(|(u, p)| -eps * p * u).collect();
            let sol = fd_solve_sampled(grid, f.unsigned_abs() as u32, 2, energy, &g, 0.0)?;
            out.insert((f, j2), sqrt_two_pi_f64() * sol.deriv_at_1);
            prev = sol.u;
        }
    }
    Ok(out)
}

/// Matrix entries `(row, col) -> a` from the f64 chain on graded grids of `cells` and
/// `2 cells` cells, Richardson-extrapolated.
pub fn fd_chain_entries(
    energy: f64,
    v: &PotentialVnm,
    degree_max: u32,
    cells: usize,
) -> Result<BTreeMap<(i64, i64), f64>, EngineError> {
    if v.d != 2 {
        return Err(EngineError::Unsupported(format!(
            "oracle is implemented for d = 2, got {}",
            v.d
        )));
    }
    let coarse = chain_on_grid(&FdGrid::graded(cells), energy, v, degree_max)?;
    let fine = chain_on_grid(&FdGrid::graded(2 * cells), energy, v, degree_max)?;
    Ok(coarse
        .into_iter()
        .map(|(key, c)| (key, (4.0 * fine[&key] - c) / 3.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::{dtn_assemble, DtnEngine, EngineConfig};
    use super::*;
    use crate::potentials::BumpSpec;
    use crate::sphere_basis::ModeIndex;

    fn engine(max_order: u32, prec: u32) -> DtnEngine {
        let cfg = EngineConfig {
            panels: 32,
            per_panel: 16,
            prec,
        };
        DtnEngine::new(3.375, &BumpSpec::default(), max_order, cfg).unwrap()
    }

    #[test]
    fn engine_agrees_with_finite_volume_chain() {
        let eng = engine(30, 256);
        for (n, m, degree_max) in [(12u32, 3u32, 30u32), (5, 2, 12)] {
            let v = PotentialVnm::new(n, m, 2, BumpSpec::default(), 256).unwrap();
            let a = dtn_assemble(&eng, &v, degree_max).unwrap().matrix;
            let fd = fd_chain_entries(3.375, &v, degree_max, FD_ORACLE_CELLS).unwrap();
            assert!(!fd.is_empty());
            let mut worst = 0.0f64;
            let mut worst_first = 0.0f64;
            for (&(row, col), &want) in &fd {
                let got = a
                    .get(
                        ModeIndex::from_frequency(row),
                        ModeIndex::from_frequency(col),
                    )
                    .map_or(0.0, |e| e.to_complex64().re);
                if want.abs() < 1e-280 {
                    continue;
                }
                let rel = (got - want).abs() / want.abs();
                worst = worst.max(rel);
                if row - col == n as i64 {
                    worst_first = worst_first.max(rel);
                }
            }
            assert!(worst < 1e-4, "n={n}: worst relative deviation {worst:e}");
            assert!(
                worst_first < 1e-6,
                "n={n}: worst level-1 deviation {worst_first:e}"
            );
        }
    }

    #[test]
    fn conjugate_potential_gives_adjoint_matrix() {
        let eng = engine(24, 128);
        let v = PotentialVnm::new(8, 2, 2, BumpSpec::default(), 128).unwrap();
        let a = dtn_assemble(&eng, &v, 24).unwrap();
        let b = dtn_assemble(&eng, &v.conj(), 24).unwrap();
        let at = a.matrix.conj_transpose();
        let mut shared = 0;
        for ((row, col), x) in at.iter() {
            let Some(y) = b.matrix.get(*row, *col) else {
                assert!(
                    x.modulus.cmp_abs(&b.chain_tail).is_le(),
                    "{row} {col} missing"
                );
                continue;
            };
            shared += 1;
            let rel = (x.modulus.log2_mag() - y.modulus.log2_mag()).abs();
            assert!(rel < 1e-10, "{row} {col}: {x:?} vs {y:?}");
            assert!((x.to_complex64().re.signum() - y.to_complex64().re.signum()).abs() < 0.5);
        }
        assert!(shared > 0);
        for ((row, col), y) in b.matrix.iter() {
            if at.get(*row, *col).is_none() {
                assert!(
                    y.modulus.cmp_abs(&a.chain_tail).is_le(),
                    "{row} {col} missing"
                );
            }
        }
    }

    #[test]
    fn truncation_is_monotone() {
        let eng = engine(30, 128);
        let v = PotentialVnm::new(6, 2, 2, BumpSpec::default(), 128).unwrap();
        let small = dtn_assemble(&eng, &v, 18).unwrap();
        let large = dtn_assemble(&eng, &v, 30).unwrap();
        for ((row, col), x) in small.matrix.iter() {
            match large.matrix.get(*row, *col) {
                Some(y) => assert!((x.modulus.log2_mag() - y.modulus.log2_mag()).abs() < 1e-20),
                None => assert!(x.modulus.cmp_abs(&large.chain_tail).is_le()),
            }
        }
        assert!(large.matrix.len() > small.matrix.len());
    }
}
