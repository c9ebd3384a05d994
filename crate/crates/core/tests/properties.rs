use std::f64::consts::PI;

use emkm_core::analysis::{ellipse_of, EllipseParams};
use emkm_core::emcore::{
    dyadic_green, dyadic_green_eigen, projector, CMat2, CMat3, CVec2, CVec3, MediumParams, Wavenumber, C64,
};
use emkm_core::forward::{synthesize_active, synthesize_passive};
use emkm_core::imaging::{active_image, passive_image, phase_correct_tensor, phase_correct_vector, point_spread};
use emkm_core::scene::{make_band, make_square_array, Dipole, ImagingGrid, Scatterer};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = [f64; 3]> {
    [-2.0..2.0f64, -2.0..2.0f64, 0.5..3.0f64]
}

fn complex() -> impl Strategy<Value = C64> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn cvec3() -> impl Strategy<Value = CVec3> {
    [complex(), complex(), complex()].prop_map(CVec3)
}

fn sym_tensor() -> impl Strategy<Value = CMat3> {
    [complex(), complex(), complex(), complex(), complex(), complex()]
        .prop_map(|v| CMat3([[v[0], v[1], v[2]], [v[1], v[3], v[4]], [v[2], v[4], v[5]]]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn green_is_normal_and_reciprocal(x in point(), y in point(), k in 0.5..80.0f64) {
        prop_assume!(((x[0]-y[0]).powi(2) + (x[1]-y[1]).powi(2) + (x[2]-y[2]).powi(2)).sqrt() > 1e-3);
        let g = dyadic_green(&x, &y, k).unwrap();
        let gh = g.adjoint();
        prop_assert!((g * gh).rel_diff(&(gh * g)) <= 1e-12);
        prop_assert!(g.rel_diff(&dyadic_green(&y, &x, k).unwrap().transpose()) <= 1e-12);
    }

    #[test]
    fn green_eigen_reconstruction(x in point(), y in point(), k in 0.5..80.0f64) {
        let d = [x[0]-y[0], x[1]-y[1], x[2]-y[2]];
        let r = (d[0]*d[0] + d[1]*d[1] + d[2]*d[2]).sqrt();
        prop_assume!(r > 1e-3);
        let (l1, l2) = dyadic_green_eigen(k, r).unwrap();
        let mut m = CMat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                let rr = d[i] * d[j] / (r * r);
                let id = if i == j { 1.0 } else { 0.0 };
                m.0[i][j] = l1 * rr + l2 * (id - rr);
            }
        }
        prop_assert!(m.rel_diff(&dyadic_green(&x, &y, k).unwrap()) <= 1e-12);
    }

    #[test]
    fn projector_is_orthogonal_projection(x in point(), y in point()) {
        let d = [x[0]-y[0], x[1]-y[1], x[2]-y[2]];
        prop_assume!((d[0]*d[0] + d[1]*d[1] + d[2]*d[2]).sqrt() > 1e-3);
        let p = projector(&x, &y).unwrap();
        prop_assert!((p * p).rel_diff(&p) < 1e-12);
        prop_assert!(p.is_symmetric(1e-15));
        prop_assert!(p.mul_vec(&CVec3::from_real(d)).norm() < 1e-12 * (d[0].abs() + d[1].abs() + d[2].abs()));
        prop_assert!((p.trace() - C64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn psf_diagonal_is_symmetric_hermitian_psd(y in point(), k in 5.0..60.0f64, v in cvec3()) {
        let array = make_square_array(1.0, 5).unwrap();
        let h = point_spread(&y, &y, Wavenumber::new(k).unwrap(), &array).unwrap();
        prop_assert!(h.is_symmetric(1e-10));
        prop_assert!(h.rel_diff(&h.adjoint()) < 1e-10);
        let q = v.dot_conj(&h.mul_vec(&v));
        prop_assert!(q.re >= -1e-12 * h.frobenius() * v.norm_sqr());
        prop_assert!(q.im.abs() <= 1e-10 * h.frobenius() * v.norm_sqr());
    }

    #[test]
    fn vector_phase_correction_ignores_global_phase(p in [complex(), complex()], phi in -PI..PI) {
        let p = CVec2(p);
        prop_assume!(p.0[0].norm() > 1e-6);
        let rotated = p.scale(C64::from_polar(1.0, phi));
        let a = phase_correct_vector(&p, 0.0);
        let b = phase_correct_vector(&rotated, 0.0);
        prop_assert!((a - b).norm() <= 1e-12 * p.norm());
        prop_assert!(a.0[0].im.abs() <= 1e-10 * a.0[0].norm());
        prop_assert!((a.norm() - p.norm()).abs() <= 1e-12 * p.norm());
    }

    #[test]
    fn tensor_phase_correction_ignores_global_phase(v in [complex(), complex(), complex()], phi in -PI..PI) {
        let alpha = CMat2([[v[0], v[1]], [v[1], v[2]]]);
        prop_assume!(v[0].norm() > 1e-6);
        let a = phase_correct_tensor(&alpha, 0.0);
        let b = phase_correct_tensor(&alpha.scale(C64::from_polar(1.0, phi)), 0.0);
        prop_assert!((a - b).frobenius() <= 1e-12 * alpha.frobenius());
        prop_assert!(a.0[0][0].im.abs() <= 1e-10 * a.0[0][0].norm());
    }

    #[test]
    fn ellipse_round_trip(a in -5.0..5.0f64, b in -5.0..5.0f64, d in -5.0..5.0f64) {
        let m = [[a, b], [b, d]];
        let e: EllipseParams = ellipse_of(&m).unwrap();
        let back = e.reconstruct();
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((back[i][j] - m[i][j]).abs() <= 1e-10 * (1.0 + a.abs() + b.abs() + d.abs()));
            }
        }
        prop_assert!(e.semi_axes[0] >= e.semi_axes[1] && e.semi_axes[1] >= 0.0);
        prop_assert!(e.angle > -PI / 2.0 && e.angle <= PI / 2.0);
    }

    #[test]
    fn passive_synthesis_and_image_are_linear(p1 in cvec3(), p2 in cvec3(), y1 in point(), y2 in point(), s in complex()) {
        let array = make_square_array(0.8, 3).unwrap();
        let band = make_band(2.4e9, 1.2e9, 2).unwrap();
        let medium = MediumParams::default();
        let grid = ImagingGrid::from_points(vec![[0.0, 0.1, 1.0], [0.3, -0.2, 2.0]]).unwrap();
        let d1 = Dipole::new(y1, p1).unwrap();
        let d2 = Dipole::new(y2, p2).unwrap();
        let d1s = Dipole::new(y1, p1 * s).unwrap();
        let a = synthesize_passive(&[d1s.clone(), d2.clone()], &array, &band, &medium).unwrap();
        let b1 = synthesize_passive(&[d1], &array, &band, &medium).unwrap();
        let b2 = synthesize_passive(&[d2], &array, &band, &medium).unwrap();
        for f in 0..2 {
            let ia = passive_image(&a, f, &grid, &array, &medium).unwrap();
            let i1 = passive_image(&b1, f, &grid, &array, &medium).unwrap();
            let i2 = passive_image(&b2, f, &grid, &array, &medium).unwrap();
            for i in 0..grid.len() {
                let sum = i1.values[i] * s + i2.values[i];
                prop_assert!((ia.values[i] - sum).norm() <= 1e-12 * (i1.values[i].norm() * s.norm() + i2.values[i].norm()));
            }
        }
    }

    #[test]
    fn active_synthesis_and_image_are_linear(a1 in sym_tensor(), a2 in sym_tensor(), y1 in point(), y2 in point()) {
        let array = make_square_array(0.8, 3).unwrap();
        let band = make_band(2.4e9, 0.0, 1).unwrap();
        let medium = MediumParams::default();
        let grid = ImagingGrid::from_points(vec![[0.0, 0.1, 1.0]]).unwrap();
        let s1 = Scatterer::new(y1, a1).unwrap();
        let s2 = Scatterer::new(y2, a2).unwrap();
        let both = synthesize_active(&[s1.clone(), s2.clone()], &array, &band, &medium).unwrap();
        let d1 = synthesize_active(&[s1], &array, &band, &medium).unwrap();
        let d2 = synthesize_active(&[s2], &array, &band, &medium).unwrap();
        let scale = d1.total_power().sqrt() + d2.total_power().sqrt();
        for ((x, y), z) in both.responses[0].iter().zip(&d1.responses[0]).zip(&d2.responses[0]) {
            prop_assert!((x - (y + z)).norm() <= 1e-12 * scale);
        }
        let ib = active_image(&both, 0, &grid, &array, &medium).unwrap();
        let i1 = active_image(&d1, 0, &grid, &array, &medium).unwrap();
        let i2 = active_image(&d2, 0, &grid, &array, &medium).unwrap();
        let sum = i1.values[0] + i2.values[0];
        prop_assert!((ib.values[0] - sum).frobenius() <= 1e-12 * (i1.values[0].frobenius() + i2.values[0].frobenius()));
    }
}
