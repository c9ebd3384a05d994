//! Fraunhofer-regime behaviour at the reference scales: a = 20λ₀, L = 100λ₀,
//! f₀ = 2.4 GHz.

use std::f64::consts::PI;

use emkm_core::analysis::validate_fraunhofer;
use emkm_core::emcore::{
    acoustic_green, dyadic_green, paraxial_green, projector, CMat3, CVec3, MediumParams, Wavenumber, C64,
};
use emkm_core::forward::synthesize_passive;
use emkm_core::imaging::{
    active_image_scene, passive_image, point_spread, point_spread_fraunhofer, psf_diagonal,
    recover_polarizability_crossrange, recover_polarization_crossrange, DeltaRule, VectorImage,
};
use emkm_core::scene::{
    make_band, make_disk_array, make_square_array, ArrayGeometry, Dipole, FrequencyBand, ImagingGrid, Scatterer,
};

const LAMBDA: f64 = 0.125;
const A: f64 = 20.0 * LAMBDA;
const L: f64 = 100.0 * LAMBDA;

fn k0() -> f64 {
    2.0 * PI / LAMBDA
}

fn square() -> ArrayGeometry {
    make_square_array(A, 40).unwrap()
}

fn disk() -> ArrayGeometry {
    make_disk_array(A, 64, 128).unwrap()
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn dyadic_green_factorizes_with_bounded_constant() {
    let array = square();
    let k = k0();
    let mut worst: f64 = 0.0;
    for y in [
        [0.0, 0.0, L],
        [7.0 * LAMBDA, 7.0 * LAMBDA, L],
        [2.0 * LAMBDA, -2.0 * LAMBDA, L + 7.0 * LAMBDA],
    ] {
        for i in (0..array.len()).step_by(37) {
            let x = array.position(i);
            let g = dyadic_green(&x, &y, k).unwrap();
            let approx = projector(&x, &y).unwrap() * acoustic_green(&x, &y, k).unwrap();
            worst = worst.max((g - approx).frobenius() / g.frobenius());
        }
    }
    let constant = worst * k * L;
    assert!(constant > 0.1 && constant < 5.0, "C = {constant}");
}

#[test]
fn paraxial_green_is_accurate_near_axis() {
    let array = square();
    let k = k0();
    for y in [[0.0, 0.0, L], [0.5 * LAMBDA, -0.5 * LAMBDA, L + 0.5 * LAMBDA]] {
        for (i, e) in array.elements().iter().enumerate() {
            let g = acoustic_green(&array.position(i), &y, k).unwrap();
            let gt = paraxial_green(e, &y, k, L).unwrap();
            assert!((g - gt).norm() / gt.norm() < 0.1);
        }
    }
}

#[test]
fn fraunhofer_report_scalings() {
    let array = square();
    let k = Wavenumber::new(k0()).unwrap();
    let window = |b: f64| -> Vec<[f64; 3]> { vec![[b, 0.0, L], [0.0, b, L], [b / 2.0, -b / 2.0, L]] };
    let wide = validate_fraunhofer(&array, &window(7.0 * LAMBDA), k, L).unwrap();
    let narrow = validate_fraunhofer(&array, &window(3.5 * LAMBDA), k, L).unwrap();
    assert!(wide.max_amplitude_error <= wide.amplitude_scale, "{wide:?}");
    assert!(narrow.max_phase_error < wide.max_phase_error);
    assert!((wide.theta_b / narrow.theta_b - 4.0).abs() < 1e-12);
}

#[test]
fn exact_and_fraunhofer_psf_agree_at_focus() {
    let array = square();
    let k = Wavenumber::new(k0()).unwrap();
    let y = [0.0, 0.0, L];
    let h = point_spread(&y, &y, k, &array).unwrap();
    let ht = point_spread_fraunhofer(&y, &y, k, &array, L).unwrap();
    assert!(h.rel_diff(&ht) < 0.05, "{}", h.rel_diff(&ht));
}

#[test]
fn psf_decays_in_cross_range() {
    let k = k0();
    let ystar = [0.0, 0.0, L];
    let offset = 10.0 * L / (k * A);
    let kw = Wavenumber::new(k).unwrap();
    for array in [disk(), square()] {
        let peak = point_spread(&ystar, &ystar, kw, &array).unwrap().frobenius();
        for dir in [[1.0, 0.0], [0.0, 1.0], [0.5f64.sqrt(), 0.5f64.sqrt()]] {
            let y = [offset * dir[0], offset * dir[1], L];
            let off = point_spread(&y, &ystar, kw, &array).unwrap().frobenius();
            assert!(off < 0.2 * peak, "{off} vs {peak}");
        }
    }
}

#[test]
fn disk_passive_image_at_source() {
    let array = disk();
    let band = FrequencyBand::single(2.0 * PI * 2.4e9).unwrap();
    let medium = MediumParams::default();
    let p = CVec3::new(c(1.0, 2.0), c(1.0, -1.0), c(1.0, 1.0));
    let ystar = [0.0, 0.0, L];
    let data = synthesize_passive(&[Dipole::new(ystar, p).unwrap()], &array, &band, &medium).unwrap();
    let grid = ImagingGrid::from_points(vec![ystar]).unwrap();
    let img = passive_image(&data, 0, &grid, &array, &medium).unwrap();
    let scale = A * A / (16.0 * PI * L * L);
    let expected = CVec3::new(p.0[0], p.0[1], c(0.0, 0.0)) * scale;
    assert!((img.values[0] - expected).norm() < 0.05 * expected.norm());
}

#[test]
fn disk_active_image_at_scatterer() {
    let array = disk();
    let band = FrequencyBand::single(2.0 * PI * 2.4e9).unwrap();
    let medium = MediumParams::default();
    let alpha = CMat3([
        [c(2.0, 1.0), c(1.0, 0.0), c(0.0, 0.0)],
        [c(1.0, 0.0), c(2.0, 2.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.5)],
    ]);
    let ystar = [0.0, 0.0, L];
    let grid = ImagingGrid::from_points(vec![ystar]).unwrap();
    let img = active_image_scene(&[Scatterer::new(ystar, alpha).unwrap()], &grid, &band, &array, &medium).unwrap();
    let scale = A.powi(4) / ((16.0 * PI).powi(2) * L.powi(4));
    let mut expected = CMat3::zero();
    for i in 0..2 {
        for j in 0..2 {
            expected.0[i][j] = alpha.0[i][j] * scale;
        }
    }
    assert!(
        img[0].values[0].rel_diff(&expected) < 0.1,
        "{}",
        img[0].values[0].rel_diff(&expected)
    );
}

#[test]
fn off_axis_scatterer_recovery_is_consistent() {
    let array = square();
    let band = make_band(2.4e9, 2.4e9, 5).unwrap();
    let medium = MediumParams::default();
    let alpha = CMat3([
        [c(1.0, 2.0), c(1.0, 0.0), c(0.0, 0.5)],
        [c(1.0, 0.0), c(3.0, 2.0), c(0.0, 0.0)],
        [c(0.0, 0.5), c(0.0, 0.0), c(0.0, 0.5)],
    ]);
    let ystar = [3.0 * LAMBDA, -2.0 * LAMBDA, L + LAMBDA];
    let grid = ImagingGrid::from_points(vec![ystar]).unwrap();
    let images = active_image_scene(&[Scatterer::new(ystar, alpha).unwrap()], &grid, &band, &array, &medium).unwrap();
    let psfs: Vec<Vec<CMat3>> = band
        .samples()
        .iter()
        .map(|&w| psf_diagonal(&grid, medium.wavenumber(w).unwrap(), &array).unwrap())
        .collect();
    let rec = recover_polarizability_crossrange(&images, &psfs, &band, DeltaRule::default()).unwrap();
    let err = (rec.uncorrected[0] - alpha.block2()).frobenius() / alpha.block2().frobenius();
    assert!(err < 0.1, "{err}");
}

#[test]
fn dipole_coupling_error_shrinks_with_separation() {
    let array = square();
    let band = FrequencyBand::single(2.0 * PI * 2.4e9).unwrap();
    let medium = MediumParams::default();
    let p1 = CVec3::new(c(1.0, 2.0), c(1.0, -1.0), c(1.0, 1.0));
    let p2 = CVec3::new(c(-2.0, 0.0), c(2.0, -2.0), c(1.0, 1.0));
    let y1 = [0.0, 0.0, L];
    let grid = ImagingGrid::from_points(vec![y1]).unwrap();
    let k = Wavenumber::new(k0()).unwrap();
    let psf = psf_diagonal(&grid, k, &array).unwrap();
    let errors: Vec<f64> = [4.5, 9.5, 19.5]
        .iter()
        .map(|&sep| {
            let y2 = [sep * LAMBDA, sep * LAMBDA, L];
            let dipoles = [Dipole::new(y1, p1).unwrap(), Dipole::new(y2, p2).unwrap()];
            let data = synthesize_passive(&dipoles, &array, &band, &medium).unwrap();
            let img: VectorImage = passive_image(&data, 0, &grid, &array, &medium).unwrap();
            let rec = recover_polarization_crossrange(&img, &psf, DeltaRule::Absolute(0.0)).unwrap();
            (rec.uncorrected[0] - p1.cross_range()).norm() / p1.cross_range().norm()
        })
        .collect();
    assert!(errors[2] < errors[0], "{errors:?}");
    assert!(errors.iter().all(|e| *e < 0.2), "{errors:?}");
}
