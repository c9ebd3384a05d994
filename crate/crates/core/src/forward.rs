//! Forward synthesis of array measurements.
//!
//! Passive data is the electric field radiated by point dipoles and sampled
//! at every array element. Active data is the Born-approximation array
//! response matrix `Π(x_r, x_s; k) = Σₙ 𝔾(x_r, yₙ) αₙ 𝔾(yₙ, x_s)`, stored
//! densely as a `3N × 3N` complex matrix per frequency.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::emcore::{dyadic_green_displacement, CMat3, CVec3, MediumParams, Point3, C64};
use crate::error::{Error, Result};
use crate::scene::{ArrayGeometry, Dipole, FrequencyBand, Scatterer};

/// Passive field samples, `fields[f][r]` at frequency `f` and element `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct PassiveData {
    pub band: FrequencyBand,
    pub n_elements: usize,
    pub fields: Vec<Vec<CVec3>>,
}

/// Active array response. For each frequency, `responses[f]` is the
/// row-major `3N × 3N` matrix whose `(3r + i, 3s + j)` entry is
/// `Π(x_r, x_s)_{ij}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveData {
    pub band: FrequencyBand,
    pub n_elements: usize,
    pub responses: Vec<Vec<C64>>,
}

impl PassiveData {
    pub fn check_against(&self, array: &ArrayGeometry) -> Result<()> {
        if self.n_elements != array.len() {
            return Err(Error::DataMismatch(format!(
                "data has {} elements, array has {}",
                self.n_elements,
                array.len()
            )));
        }
        if self.fields.len() != self.band.len() || self.fields.iter().any(|f| f.len() != self.n_elements) {
            return Err(Error::DataMismatch("field table does not match band × elements".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.fields.iter().flatten().all(CVec3::is_finite)
    }
}

impl ActiveData {
    /// Matrix dimension `3N`.
    pub fn dim(&self) -> usize {
        3 * self.n_elements
    }

    /// The 3×3 block `Π(x_r, x_s)` at frequency index `f`.
    pub fn block(&self, f: usize, r: usize, s: usize) -> CMat3 {
        let n3 = self.dim();
        let m = &self.responses[f];
        let mut out = CMat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = m[(3 * r + i) * n3 + 3 * s + j];
            }
        }
        out
    }

    pub fn check_against(&self, array: &ArrayGeometry) -> Result<()> {
        if self.n_elements != array.len() {
            return Err(Error::DataMismatch(format!(
                "data has {} elements, array has {}",
                self.n_elements,
                array.len()
            )));
        }
        let n3 = self.dim();
        if self.responses.len() != self.band.len() || self.responses.iter().any(|m| m.len() != n3 * n3) {
            return Err(Error::DataMismatch("response table does not match band × (3N)²".into()));
        }
        Ok(())
    }

    /// `Σ_f ‖Π_f‖²_F`.
    pub fn total_power(&self) -> f64 {
        self.responses.iter().flatten().map(|c| c.norm_sqr()).sum()
    }

    /// Average power per entry, `Σ_f ‖Π_f‖²_F / ((3N)² N_freq)`.
    pub fn average_power(&self) -> f64 {
        let n3 = self.dim() as f64;
        self.total_power() / (n3 * n3 * self.band.len() as f64)
    }
}

fn check_off_plane(p: &Point3) -> Result<()> {
    if p[2] > 0.0 && p.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::OnArrayPlane { point: *p })
    }
}

/// `𝔾((x_r, 0), y; k)` for every element, in element order.
pub(crate) fn greens_to_point(array: &ArrayGeometry, y: &Point3, k: f64) -> Vec<CMat3> {
    array
        .elements()
        .iter()
        .map(|e| dyadic_green_displacement(&[e[0] - y[0], e[1] - y[1], -y[2]], k))
        .collect()
}

/// Field `μω² Σⱼ 𝔾(x_r, yⱼ; k) pⱼ` at every element and frequency.
pub fn synthesize_passive(
    dipoles: &[Dipole],
    array: &ArrayGeometry,
    band: &FrequencyBand,
    medium: &MediumParams,
) -> Result<PassiveData> {
    medium.validate()?;
    for d in dipoles {
        d.validate()?;
        check_off_plane(&d.position)?;
    }
    let fields = band
        .samples()
        .par_iter()
        .map(|&omega| {
            let k = medium.wavenumber(omega)?.get();
            let factor = medium.source_factor(omega);
            let mut field = vec![CVec3::zero(); array.len()];
            for d in dipoles {
                for (r, g) in greens_to_point(array, &d.position, k).iter().enumerate() {
                    field[r] += g.mul_vec(&d.polarization);
                }
            }
            Ok(field.into_iter().map(|v| v * factor).collect())
        })
        .collect::<Result<Vec<Vec<CVec3>>>>()?;
    Ok(PassiveData {
        band: band.clone(),
        n_elements: array.len(),
        fields,
    })
}

/// Field `μω² Σ_s w_s 𝔾(x, x_s; k) p(x_s)` generated at `x` by the
/// array dipole distribution `p_dist` (one polarization per element).
pub fn incident_field(
    p_dist: &[CVec3],
    array: &ArrayGeometry,
    x: &Point3,
    omega: f64,
    medium: &MediumParams,
) -> Result<CVec3> {
    check_off_plane(x)?;
    if p_dist.len() != array.len() {
        return Err(Error::DataMismatch(format!(
            "{} polarizations for {} elements",
            p_dist.len(),
            array.len()
        )));
    }
    let k = medium.wavenumber(omega)?.get();
    let mut e = CVec3::zero();
    for (i, (p, w)) in p_dist.iter().zip(array.weights()).enumerate() {
        let xs = array.position(i);
        let g = dyadic_green_displacement(&[x[0] - xs[0], x[1] - xs[1], x[2] - xs[2]], k);
        e += g.mul_vec(p) * *w;
    }
    Ok(e * medium.source_factor(omega))
}

/// Dense Born array response `Π(x_r, x_s; k) = Σₙ 𝔾(x_r, yₙ) αₙ 𝔾(yₙ, x_s)`.
///
/// Memory is `(3N)² · N_freq` complex numbers; for large arrays image the
/// scene directly with [`crate::imaging::active_image_scene`].
pub fn synthesize_active(
    scatterers: &[Scatterer],
    array: &ArrayGeometry,
    band: &FrequencyBand,
    medium: &MediumParams,
) -> Result<ActiveData> {
    medium.validate()?;
    for s in scatterers {
        s.validate()?;
        check_off_plane(&s.position)?;
    }
    let n = array.len();
    let n3 = 3 * n;
    let responses = band
        .samples()
        .iter()
        .map(|&omega| {
            let k = medium.wavenumber(omega)?.get();
            // U[n][r] = 𝔾(x_r, yₙ), V[n][s] = αₙ 𝔾(yₙ, x_s) = αₙ U[n][s] (𝔾 symmetric)
            let u: Vec<Vec<CMat3>> = scatterers
                .iter()
                .map(|s| greens_to_point(array, &s.position, k))
                .collect();
            let v: Vec<Vec<CMat3>> = scatterers
                .iter()
                .zip(&u)
                .map(|(s, ur)| ur.iter().map(|g| s.polarizability * *g).collect())
                .collect();
            let mut m = vec![C64::new(0.0, 0.0); n3 * n3];
            m.par_chunks_mut(3 * n3).enumerate().for_each(|(r, rows)| {
                for s in 0..n {
                    let mut blk = CMat3::zero();
                    for (ur, vs) in u.iter().zip(&v) {
                        blk += ur[r] * vs[s];
                    }
                    for i in 0..3 {
                        rows[i * n3 + 3 * s..i * n3 + 3 * s + 3].copy_from_slice(&blk.0[i]);
                    }
                }
            });
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ActiveData {
        band: band.clone(),
        n_elements: n,
        responses,
    })
}

/// Per-entry noise variance `ε · p_avg` for an SNR in dB
/// (`ε = 10^(snr_db/10)`, positive values mean noise exceeds signal).
pub fn noise_variance(snr_db: f64, average_power: f64) -> f64 {
    10f64.powf(snr_db / 10.0) * average_power
}

/// Deterministic stream of circular complex Gaussian samples with
/// `E|w|² = variance`, one independent stream per frequency index.
fn noise_stream(seed: u64, freq_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(freq_index as u64);
    rng
}

fn add_gaussian(values: &mut [C64], variance: f64, rng: &mut ChaCha8Rng) {
    let sigma = (variance / 2.0).sqrt();
    for v in values {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v += C64::new(re * sigma, im * sigma);
    }
}

/// Adds i.i.d. circular complex Gaussian noise of per-entry variance
/// `ε · p_avg` to every response entry. Each frequency draws from its own
/// ChaCha8 stream (`seed`, stream = frequency index) in row-major entry
/// order, so the result depends only on `(seed, data shape)`.
pub fn add_noise(data: &ActiveData, snr_db: f64, seed: u64) -> Result<ActiveData> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidInput(format!("SNR {snr_db} dB is not finite")));
    }
    let p_avg = data.average_power();
    if !(p_avg > 0.0) {
        return Err(Error::ZeroSignal);
    }
    let variance = noise_variance(snr_db, p_avg);
    let mut out = data.clone();
    out.responses
        .par_iter_mut()
        .enumerate()
        .for_each(|(f, m)| add_gaussian(m, variance, &mut noise_stream(seed, f)));
    Ok(out)
}

/// Passive counterpart of [`add_noise`]: the `3N` field samples per
/// frequency receive noise of variance `ε · p_avg`, with
/// `p_avg = Σ_f ‖Π_f‖² / (3N · N_freq)`.
pub fn add_noise_passive(data: &PassiveData, snr_db: f64, seed: u64) -> Result<PassiveData> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidInput(format!("SNR {snr_db} dB is not finite")));
    }
    let total: f64 = data.fields.iter().flatten().map(CVec3::norm_sqr).sum();
    let p_avg = total / (3.0 * data.n_elements as f64 * data.band.len() as f64);
    if !(p_avg > 0.0) {
        return Err(Error::ZeroSignal);
    }
    let variance = noise_variance(snr_db, p_avg);
    let mut out = data.clone();
    for (f, field) in out.fields.iter_mut().enumerate() {
        let mut flat: Vec<C64> = field.iter().flat_map(|v| v.0).collect();
        add_gaussian(&mut flat, variance, &mut noise_stream(seed, f));
        for (v, chunk) in field.iter_mut().zip(flat.chunks_exact(3)) {
            *v = CVec3([chunk[0], chunk[1], chunk[2]]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emcore::dyadic_green;
    use crate::scene::{make_band, make_square_array};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn small_setup() -> (ArrayGeometry, FrequencyBand, MediumParams) {
        (
            make_square_array(0.5, 3).unwrap(),
            make_band(2.4e9, 0.8e9, 3).unwrap(),
            MediumParams::default(),
        )
    }

    fn sym(a: [[C64; 3]; 3]) -> CMat3 {
        let m = CMat3(a);
        (m + m.transpose()) * 0.5
    }

    #[test]
    fn passive_empty_and_single_dipole() {
        let (array, band, medium) = small_setup();
        let empty = synthesize_passive(&[], &array, &band, &medium).unwrap();
        assert!(empty.fields.iter().flatten().all(|v| v.norm() == 0.0));

        let p = CVec3::new(c(1.0, 2.0), c(1.0, -1.0), c(1.0, 1.0));
        let y = [0.1, -0.05, 1.5];
        let d = synthesize_passive(&[Dipole::new(y, p).unwrap()], &array, &band, &medium).unwrap();
        let omega = band.samples()[1];
        let k = omega / medium.c;
        let g = dyadic_green(&array.position(4), &y, k).unwrap();
        let expected = g.mul_vec(&p) * medium.source_factor(omega);
        assert!((d.fields[1][4] - expected).norm() <= 1e-13 * expected.norm());
    }

    #[test]
    fn passive_superposition() {
        let (array, band, medium) = small_setup();
        let d1 = Dipole::new([0.0, 0.1, 1.0], CVec3::new(c(1.0, 0.0), c(0.0, 1.0), c(0.5, 0.5))).unwrap();
        let d2 = Dipole::new([0.2, -0.1, 1.3], CVec3::new(c(0.0, -2.0), c(1.0, 1.0), c(0.0, 0.0))).unwrap();
        let both = synthesize_passive(&[d1.clone(), d2.clone()], &array, &band, &medium).unwrap();
        let a = synthesize_passive(&[d1], &array, &band, &medium).unwrap();
        let b = synthesize_passive(&[d2], &array, &band, &medium).unwrap();
        for f in 0..band.len() {
            for r in 0..array.len() {
                let sum = a.fields[f][r] + b.fields[f][r];
                assert!((both.fields[f][r] - sum).norm() <= 1e-13 * sum.norm());
            }
        }
    }

    #[test]
    fn dipole_on_plane_rejected() {
        let (array, band, medium) = small_setup();
        let d = Dipole::new([0.0, 0.0, 0.0], CVec3::from_real([1.0, 0.0, 0.0])).unwrap();
        assert!(matches!(
            synthesize_passive(&[d], &array, &band, &medium),
            Err(Error::OnArrayPlane { .. })
        ));
    }

    #[test]
    fn incident_field_examples() {
        let (array, _, medium) = small_setup();
        let omega = 2.0 * std::f64::consts::PI * 2.4e9;
        let x = [0.05, 0.0, 0.9];
        let zero = vec![CVec3::zero(); array.len()];
        assert_eq!(
            incident_field(&zero, &array, &x, omega, &medium).unwrap(),
            CVec3::zero()
        );

        let mut one = zero.clone();
        let p = CVec3::new(c(0.0, 1.0), c(2.0, 0.0), c(0.0, 0.0));
        one[5] = p;
        let e = incident_field(&one, &array, &x, omega, &medium).unwrap();
        let g = dyadic_green(&x, &array.position(5), omega / medium.c).unwrap();
        let expected = g.mul_vec(&p) * (array.weights()[5] * medium.source_factor(omega));
        assert!((e - expected).norm() <= 1e-13 * expected.norm());
        assert!(incident_field(&one, &array, &[0.0, 0.0, 0.0], omega, &medium).is_err());
    }

    /// Born composition: the scattered field for an array dipole
    /// distribution is μω² 𝔾(x_r, y) α E_inc(y), and must equal the
    /// contraction μ²ω⁴ Σ_s w_s Π(x_r, x_s) p(x_s).
    #[test]
    fn incident_field_composes_with_active_response() {
        let (array, band, medium) = small_setup();
        let alpha = sym([
            [c(2.0, 1.0), c(1.0, 0.0), c(0.0, 0.0)],
            [c(1.0, 0.0), c(2.0, 2.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.5)],
        ]);
        let y = [0.05, -0.1, 1.2];
        let data = synthesize_active(&[Scatterer::new(y, alpha).unwrap()], &array, &band, &medium).unwrap();
        let p_dist: Vec<CVec3> = (0..array.len())
            .map(|i| CVec3::new(c(i as f64, 1.0), c(0.5, -(i as f64)), c(1.0, 0.25)))
            .collect();
        let f = 2;
        let omega = band.samples()[f];
        let k = omega / medium.c;
        let e_inc = incident_field(&p_dist, &array, &y, omega, &medium).unwrap();
        let sf = medium.source_factor(omega);
        for r in 0..array.len() {
            let g = dyadic_green(&array.position(r), &y, k).unwrap();
            let scat = g.mul_vec(&alpha.mul_vec(&e_inc)) * sf;
            let mut contraction = CVec3::zero();
            for s in 0..array.len() {
                contraction += data.block(f, r, s).mul_vec(&p_dist[s]) * array.weights()[s];
            }
            let contraction = contraction * (sf * sf);
            assert!((scat - contraction).norm() <= 1e-12 * scat.norm());
        }
    }

    #[test]
    fn active_reciprocity_and_empty() {
        let (array, band, medium) = small_setup();
        let empty = synthesize_active(&[], &array, &band, &medium).unwrap();
        assert!(empty.responses.iter().flatten().all(|v| v.norm() == 0.0));

        let s1 = Scatterer::new(
            [0.0, 0.0, 1.0],
            sym([
                [c(1.0, 2.0), c(1.0, 0.0), c(0.0, 0.5)],
                [c(1.0, 0.0), c(3.0, 2.0), c(0.0, 0.0)],
                [c(0.0, 0.5), c(0.0, 0.0), c(0.0, 0.5)],
            ]),
        )
        .unwrap();
        let s2 = Scatterer::new([0.1, 0.2, 1.4], CMat3::identity()).unwrap();
        let d = synthesize_active(&[s1, s2], &array, &band, &medium).unwrap();
        for f in 0..band.len() {
            for r in 0..array.len() {
                for s in 0..array.len() {
                    let a = d.block(f, r, s);
                    let b = d.block(f, s, r).transpose();
                    assert!(a.rel_diff(&b) <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn single_scatterer_is_product_of_three_matrices() {
        let (array, band, medium) = small_setup();
        let alpha = CMat3::diag([c(1.0, 1.0), c(2.0, 0.0), c(0.0, 3.0)]);
        let y = [0.0, 0.1, 0.8];
        let d = synthesize_active(&[Scatterer::new(y, alpha).unwrap()], &array, &band, &medium).unwrap();
        let k = band.samples()[0] / medium.c;
        let gr = dyadic_green(&array.position(1), &y, k).unwrap();
        let gs = dyadic_green(&y, &array.position(7), k).unwrap();
        let expected = gr * alpha * gs;
        assert!(d.block(0, 1, 7).rel_diff(&expected) < 1e-13);
    }

    #[test]
    fn noise_requires_signal_and_is_deterministic() {
        let (array, band, medium) = small_setup();
        let empty = synthesize_active(&[], &array, &band, &medium).unwrap();
        assert_eq!(add_noise(&empty, 10.0, 1), Err(Error::ZeroSignal));

        let s = Scatterer::new([0.0, 0.0, 1.0], CMat3::identity()).unwrap();
        let d = synthesize_active(&[s], &array, &band, &medium).unwrap();
        let a = add_noise(&d, 10.0, 42).unwrap();
        let b = add_noise(&d, 10.0, 42).unwrap();
        let bits = |x: &ActiveData| -> Vec<u64> {
            x.responses
                .iter()
                .flatten()
                .flat_map(|c| [c.re.to_bits(), c.im.to_bits()])
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&add_noise(&d, 10.0, 43).unwrap()));
    }

    #[test]
    fn snr_db_maps_to_power_ratio() {
        assert!((noise_variance(10.0, 1.0) - 10.0).abs() < 1e-12);
        assert!((10.0 * (noise_variance(-3.0, 2.0) / 2.0).log10() + 3.0).abs() < 1e-12);
    }

    #[test]
    fn passive_noise_is_deterministic() {
        let (array, band, medium) = small_setup();
        let d = Dipole::new([0.0, 0.0, 1.0], CVec3::from_real([1.0, 0.0, 0.0])).unwrap();
        let data = synthesize_passive(&[d], &array, &band, &medium).unwrap();
        assert_eq!(
            add_noise_passive(&data, 0.0, 7).unwrap(),
            add_noise_passive(&data, 0.0, 7).unwrap()
        );
        let empty = synthesize_passive(&[], &array, &band, &medium).unwrap();
        assert_eq!(add_noise_passive(&empty, 0.0, 7), Err(Error::ZeroSignal));
    }
}
