//! Scenario pipeline: synthesize, image, recover, analyze, write.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use emkm_core::analysis::{ellipse_of, focal_width, peak_index, profile, wrap_half_turn, EllipseParams, Line};
use emkm_core::emcore::{CMat2, CMat3, CVec2, CVec3, Point3, C64};
use emkm_core::forward::{add_noise, add_noise_passive, synthesize_active, synthesize_passive};
use emkm_core::imaging::{
    active_image_scene, active_images, integrate_band, passive_image_band_with_psf, psf_diagonal_per_frequency,
    recover_polarizability_crossrange, recover_polarization_crossrange, recover_polarization_full, CrossRangeRecovery,
    TensorImage, VectorImage,
};
use emkm_core::scene::ImagingGrid;

use crate::config::{ActiveSolver, ConfigError, GridFormat, Product, RecoveryMode, Scenario, ScenarioConfig, Scene};
use crate::formats::{write_binary, write_profile, write_text, GridField, PROFILE_SCHEMA, TEXT_SCHEMA};
use crate::manifest::{FileEntry, RunManifest, Timing};

/// Ratio `|e₂|/|e₁|` above which the major axis is taken from the
/// algebraically largest eigenvalue instead of the largest magnitude.
pub const NEAR_DEGENERATE: f64 = 0.9;

/// Axis ellipses whose eigenvalues have nearly equal magnitude switch to
/// the direction of the largest eigenvalue, which stays stable when the
/// two have opposite signs.
pub fn major_axis_angle(e: &EllipseParams) -> f64 {
    if e.semi_axes[1] > NEAR_DEGENERATE * e.semi_axes[0] {
        e.angle_of_largest_eigenvalue()
    } else {
        e.angle
    }
}

fn symmetrized(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let b = 0.5 * (m[0][1] + m[1][0]);
    [[m[0][0], b], [b, m[1][1]]]
}

/// Ellipses of the real and imaginary parts of a cross-range tensor.
pub fn tensor_ellipses(alpha: &CMat2) -> [EllipseParams; 2] {
    [alpha.re(), alpha.im()].map(|m| ellipse_of(&symmetrized(m)).expect("symmetrized finite matrix"))
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io { .. } => 4,
        }
    }
}

impl From<emkm_core::Error> for RunError {
    fn from(e: emkm_core::Error) -> Self {
        RunError::Numerical(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Cross-range recovery of either kind.
#[derive(Clone, Debug)]
pub enum Recovery {
    Vector(CrossRangeRecovery<CVec2>),
    Tensor(CrossRangeRecovery<CMat2>),
    /// Full 3×3 solves; singular points hold zero and `cond = inf`.
    Full {
        values: Vec<CVec3>,
        cond: Vec<f64>,
    },
}

impl Recovery {
    pub fn magnitudes(&self) -> Vec<f64> {
        match self {
            Recovery::Vector(r) => r.magnitudes(),
            Recovery::Tensor(r) => r.magnitudes(),
            Recovery::Full { values, .. } => values.iter().map(CVec3::norm).collect(),
        }
    }

    pub fn singular_fraction(&self) -> f64 {
        match self {
            Recovery::Vector(r) => r.singular_fraction(),
            Recovery::Tensor(r) => r.singular_fraction(),
            Recovery::Full { cond, .. } => {
                cond.iter().filter(|c| c.is_infinite()).count() as f64 / cond.len().max(1) as f64
            }
        }
    }

    fn cond(&self) -> &[f64] {
        match self {
            Recovery::Vector(r) => &r.cond,
            Recovery::Tensor(r) => &r.cond,
            Recovery::Full { cond, .. } => cond,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Image {
    Passive(VectorImage),
    /// Band-integrated image and the per-frequency images it came from.
    Active {
        band: TensorImage,
        per_frequency: Vec<TensorImage>,
    },
}

impl Image {
    pub fn magnitudes(&self) -> Vec<f64> {
        match self {
            Image::Passive(i) => i.magnitudes(),
            Image::Active { band, .. } => band.magnitudes(),
        }
    }
}

/// Profile through the peak along one grid axis.
#[derive(Clone, Debug)]
pub struct AxisProfile {
    /// `x`, `y` or `z`, or `axisN` for oblique axes.
    pub label: String,
    pub samples: Vec<(f64, f64)>,
    pub width: Option<f64>,
}

/// Ellipse (or direction) of a recovered value at a marker point.
#[derive(Clone, Debug)]
pub struct EllipseRow {
    pub marker: usize,
    pub point: Point3,
    pub part: &'static str,
    pub semi_axes: [f64; 2],
    pub angle: f64,
}

#[derive(Clone, Debug)]
pub struct GridResult {
    pub name: String,
    pub grid: ImagingGrid,
    pub image: Image,
    pub recovery: Option<Recovery>,
    pub profiles: Vec<AxisProfile>,
    pub ellipses: Vec<EllipseRow>,
}

impl GridResult {
    /// Magnitudes of the recovery if present, else of the image.
    pub fn magnitudes(&self) -> Vec<f64> {
        match &self.recovery {
            Some(r) => r.magnitudes(),
            None => self.image.magnitudes(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutputs {
    pub grids: Vec<GridResult>,
    pub timings: Vec<Timing>,
    pub solver: &'static str,
}

/// Marker points used for ellipse tables: the configured sources, or the
/// centre and z-face centres of an extended block.
fn markers(cfg: &ScenarioConfig, scenario: &Scenario) -> Vec<Point3> {
    if let Some(block) = &cfg.scene.extended {
        let c = block.center;
        let h = block.side / 2.0;
        return vec![[c[0], c[1], c[2] - h], c, [c[0], c[1], c[2] + h]];
    }
    match &scenario.scene {
        Scene::Passive(d) => d.iter().map(|d| d.position).collect(),
        Scene::Active(s) => s.iter().map(|s| s.position).collect(),
    }
}

fn axis_label(step: &Point3, i: usize) -> String {
    let nz: Vec<usize> = (0..3).filter(|&c| step[c] != 0.0).collect();
    match nz.as_slice() {
        [c] => ["x", "y", "z"][*c].to_string(),
        _ => format!("axis{i}"),
    }
}

fn axis_profiles(grid: &ImagingGrid, magnitudes: &[f64]) -> Result<Vec<AxisProfile>, RunError> {
    let Some(peak) = magnitudes
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &m)| match best {
            Some((_, b)) if b >= m => best,
            _ => Some((i, m)),
        })
        .map(|(i, _)| i)
    else {
        return Ok(Vec::new());
    };
    let dims = grid.dims();
    let mut idx = vec![0usize; dims.len()];
    let mut rem = peak;
    for d in (0..dims.len()).rev() {
        idx[d] = rem % dims[d];
        rem /= dims[d];
    }
    let p = grid.points()[peak];
    let mut out = Vec::new();
    for (a, axis) in grid.axes().iter().enumerate() {
        if axis.count < 2 || axis.step == [0.0; 3] {
            continue;
        }
        let t = idx[a] as f64;
        let line = Line {
            origin: [
                p[0] - t * axis.step[0],
                p[1] - t * axis.step[1],
                p[2] - t * axis.step[2],
            ],
            step: axis.step,
            n: axis.count,
        };
        let samples = profile(grid, magnitudes, &line)?;
        let width = focal_width(&samples, peak_index(&samples)).ok();
        out.push(AxisProfile {
            label: axis_label(&axis.step, a),
            samples,
            width,
        });
    }
    Ok(out)
}

fn ellipse_rows(grid: &ImagingGrid, recovery: &Recovery, markers: &[Point3]) -> Vec<EllipseRow> {
    let spacing = grid
        .axes()
        .iter()
        .map(|a| a.step.iter().map(|s| s * s).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let mut rows = Vec::new();
    for (m, y) in markers.iter().enumerate() {
        let i = grid.nearest(y);
        let q = grid.points()[i];
        let dist = ((q[0] - y[0]).powi(2) + (q[1] - y[1]).powi(2) + (q[2] - y[2]).powi(2)).sqrt();
        if dist > spacing.max(1e-12) {
            continue;
        }
        match recovery {
            Recovery::Tensor(r) => {
                for (part, e) in ["re", "im"].into_iter().zip(tensor_ellipses(&r.values[i])) {
                    rows.push(EllipseRow {
                        marker: m,
                        point: q,
                        part,
                        semi_axes: e.semi_axes,
                        angle: major_axis_angle(&e),
                    });
                }
            }
            Recovery::Vector(_) | Recovery::Full { .. } => {
                let p = match recovery {
                    Recovery::Vector(r) => r.values[i],
                    Recovery::Full { values, .. } => values[i].cross_range(),
                    Recovery::Tensor(_) => unreachable!(),
                };
                for (part, v) in [("re", p.re()), ("im", p.im())] {
                    rows.push(EllipseRow {
                        marker: m,
                        point: q,
                        part,
                        semi_axes: [v[0].hypot(v[1]), 0.0],
                        angle: wrap_half_turn(v[1].atan2(v[0])),
                    });
                }
            }
        }
    }
    rows
}

/// Runs the numerical pipeline without touching the file system.
pub fn compute(cfg: &ScenarioConfig) -> Result<RunOutputs, RunError> {
    let scenario = cfg.build()?;
    let Scenario {
        medium,
        array,
        band,
        scene,
        grids,
    } = &scenario;
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |label: &str, timings: &mut Vec<Timing>| {
        timings.push(Timing {
            stage: label.to_string(),
            seconds: clock.elapsed().as_secs_f64(),
        });
        clock = Instant::now();
    };
    let wants = |p: Product| cfg.outputs.products.contains(&p);
    let recover = wants(Product::Recovery) || wants(Product::Ellipses) || wants(Product::Profiles);
    let marks = markers(cfg, &scenario);
    let mut results = Vec::with_capacity(grids.len());
    let solver;

    match scene {
        Scene::Passive(dipoles) => {
            solver = "passive";
            let mut data = synthesize_passive(dipoles, array, band, medium)?;
            if let Some(n) = cfg.noise {
                data = add_noise_passive(&data, n.snr_db, n.seed)?;
            }
            lap("synthesize", &mut timings);
            for (name, grid) in grids {
                let (image, psf) = passive_image_band_with_psf(&data, grid, array, medium)?;
                let recovery = if !recover {
                    None
                } else {
                    Some(match cfg.recovery.mode {
                        RecoveryMode::Crossrange => {
                            Recovery::Vector(recover_polarization_crossrange(&image, &psf, cfg.recovery.delta)?)
                        }
                        RecoveryMode::Full3x3 => {
                            let (values, cond) = image
                                .values
                                .iter()
                                .zip(&psf)
                                .map(|(v, h)| recover_polarization_full(v, h).unwrap_or((CVec3::zero(), f64::INFINITY)))
                                .unzip();
                            Recovery::Full { values, cond }
                        }
                    })
                };
                results.push((name.clone(), grid.clone(), Image::Passive(image), recovery));
                lap(&format!("image:{name}"), &mut timings);
            }
        }
        Scene::Active(scatterers) => {
            let dense = match cfg.solver.active {
                ActiveSolver::Dense => true,
                ActiveSolver::Scene => false,
                ActiveSolver::Auto => cfg.noise.is_some(),
            };
            let data = if dense {
                solver = "dense";
                let mut d = synthesize_active(scatterers, array, band, medium)?;
                if let Some(n) = cfg.noise {
                    d = add_noise(&d, n.snr_db, n.seed)?;
                }
                lap("synthesize", &mut timings);
                Some(d)
            } else {
                solver = "scene";
                None
            };
            for (name, grid) in grids {
                let per_frequency = match &data {
                    Some(d) => active_images(d, grid, array, medium)?,
                    None => active_image_scene(scatterers, grid, band, array, medium)?,
                };
                let integrated = integrate_band(&per_frequency, band)?;
                let recovery = if recover {
                    let psfs = psf_diagonal_per_frequency(grid, band, array, medium)?;
                    Some(Recovery::Tensor(recover_polarizability_crossrange(
                        &per_frequency,
                        &psfs,
                        band,
                        cfg.recovery.delta,
                    )?))
                } else {
                    None
                };
                let image = Image::Active {
                    band: integrated,
                    per_frequency,
                };
                results.push((name.clone(), grid.clone(), image, recovery));
                lap(&format!("image:{name}"), &mut timings);
            }
        }
    }

    let mut grids_out = Vec::with_capacity(results.len());
    for (name, grid, image, recovery) in results {
        if let Some(r) = &recovery {
            let frac = r.singular_fraction();
            if frac > cfg.recovery.max_singular_fraction {
                return Err(RunError::Numerical(format!(
                    "grid `{name}`: {:.1}% of points have singular systems (limit {:.1}%)",
                    100.0 * frac,
                    100.0 * cfg.recovery.max_singular_fraction
                )));
            }
        }
        let mut g = GridResult {
            name,
            grid,
            image,
            recovery,
            profiles: Vec::new(),
            ellipses: Vec::new(),
        };
        g.profiles = axis_profiles(&g.grid, &g.magnitudes())?;
        if let Some(r) = &g.recovery {
            g.ellipses = ellipse_rows(&g.grid, r, &marks);
        }
        grids_out.push(g);
    }
    lap("analyze", &mut timings);
    Ok(RunOutputs {
        grids: grids_out,
        timings,
        solver,
    })
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn image_field(g: &GridResult) -> GridField {
    match &g.image {
        Image::Passive(img) => GridField {
            grid: g.grid.clone(),
            components: AXES.iter().map(|s| s.to_string()).collect(),
            values: img.values.iter().map(|v| v.0.to_vec()).collect(),
        },
        Image::Active { band, .. } => GridField {
            grid: g.grid.clone(),
            components: tensor_names(3),
            values: band.values.iter().map(flatten3).collect(),
        },
    }
}

fn tensor_names(n: usize) -> Vec<String> {
    (0..n)
        .flat_map(|i| (0..n).map(move |j| format!("{}{}", AXES[i], AXES[j])))
        .collect()
}

fn flatten3(m: &CMat3) -> Vec<C64> {
    m.0.iter().flatten().copied().collect()
}

fn recovery_field(g: &GridResult, r: &Recovery) -> GridField {
    let (components, values): (Vec<String>, Vec<Vec<C64>>) = match r {
        Recovery::Vector(r) => (
            ["px", "py", "px_raw", "py_raw"].map(String::from).to_vec(),
            r.values
                .iter()
                .zip(&r.uncorrected)
                .map(|(v, u)| vec![v.0[0], v.0[1], u.0[0], u.0[1]])
                .collect(),
        ),
        Recovery::Tensor(r) => (
            ["axx", "axy", "ayy", "axx_raw", "axy_raw", "ayy_raw"]
                .map(String::from)
                .to_vec(),
            r.values
                .iter()
                .zip(&r.uncorrected)
                .map(|(v, u)| vec![v.0[0][0], v.0[0][1], v.0[1][1], u.0[0][0], u.0[0][1], u.0[1][1]])
                .collect(),
        ),
        Recovery::Full { values, .. } => (
            ["px", "py", "pz"].map(String::from).to_vec(),
            values.iter().map(|v| v.0.to_vec()).collect(),
        ),
    };
    GridField {
        grid: g.grid.clone(),
        components,
        values,
    }
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<FileEntry>,
}

impl Writer<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: String, kind: &str, schema: &str) {
        self.files.push(FileEntry {
            path: name,
            kind: kind.to_string(),
            schema: schema.to_string(),
        });
    }

    fn grid(&mut self, stem: &str, kind: &str, field: &GridField, format: GridFormat) -> Result<(), RunError> {
        if matches!(format, GridFormat::Text | GridFormat::Both) {
            let name = format!("{stem}.csv");
            let p = self.path(&name);
            write_text(&p, field).map_err(io_err(&p))?;
            self.record(name, kind, TEXT_SCHEMA);
        }
        if matches!(format, GridFormat::Binary | GridFormat::Both) {
            let name = format!("{stem}.emkm");
            let p = self.path(&name);
            write_binary(&p, field).map_err(io_err(&p))?;
            self.record(name, kind, crate::manifest::BINARY_SCHEMA);
        }
        Ok(())
    }

    fn text(&mut self, name: &str, kind: &str, schema: &str, body: &str) -> Result<(), RunError> {
        let p = self.path(name);
        fs::write(&p, body).map_err(io_err(&p))?;
        self.record(name.to_string(), kind, schema);
        Ok(())
    }
}

pub const ELLIPSE_SCHEMA: &str = "emkm-ellipses/1";
pub const REPORT_SCHEMA: &str = "emkm-report/1";
pub const CONFIG_SCHEMA: &str = "emkm-config/1";

fn ellipse_table(rows: &[EllipseRow]) -> String {
    let mut s = format!("# schema: {ELLIPSE_SCHEMA}\nmarker,x,y,z,part,semi_major,semi_minor,angle_rad\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{},{:e},{:e},{:e}",
            r.marker, r.point[0], r.point[1], r.point[2], r.part, r.semi_axes[0], r.semi_axes[1], r.angle
        );
    }
    s
}

/// Key/value report: one `grid,key,value` record per line.
fn report_text(cfg: &ScenarioConfig, out: &RunOutputs) -> String {
    let mut s = format!("# schema: {REPORT_SCHEMA}\ngrid,key,value\n");
    let lambda0 = cfg.wavelength0();
    let _ = writeln!(s, "*,solver,{}", out.solver);
    let _ = writeln!(s, "*,wavelength0,{lambda0:e}");
    for g in &out.grids {
        let mags = g.magnitudes();
        let peak = mags
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |b, (i, &m)| if m > b.1 { (i, m) } else { b });
        let p = g.grid.points()[peak.0];
        let n = &g.name;
        let _ = writeln!(s, "{n},points,{}", g.grid.len());
        let _ = writeln!(s, "{n},peak_value,{:e}", peak.1);
        let _ = writeln!(s, "{n},peak_x,{:e}", p[0]);
        let _ = writeln!(s, "{n},peak_y,{:e}", p[1]);
        let _ = writeln!(s, "{n},peak_z,{:e}", p[2]);
        if let Some(r) = &g.recovery {
            let _ = writeln!(s, "{n},singular_fraction,{:e}", r.singular_fraction());
            let worst = r.cond().iter().copied().filter(|c| c.is_finite()).fold(0.0, f64::max);
            let _ = writeln!(s, "{n},max_condition,{worst:e}");
            let _ = writeln!(s, "{n},condition_at_peak,{:e}", r.cond()[peak.0]);
            let delta = match r {
                Recovery::Vector(r) => Some(r.delta),
                Recovery::Tensor(r) => Some(r.delta),
                Recovery::Full { .. } => None,
            };
            if let Some(d) = delta {
                let _ = writeln!(s, "{n},delta,{d:e}");
            }
        }
        for prof in &g.profiles {
            match prof.width {
                Some(w) => {
                    let _ = writeln!(s, "{n},focal_width_{},{w:e}", prof.label);
                    let _ = writeln!(s, "{n},focal_width_{}_wavelengths,{:e}", prof.label, w / lambda0);
                }
                None => {
                    let _ = writeln!(s, "{n},focal_width_{},nan", prof.label);
                }
            }
        }
    }
    s
}

/// Runs the scenario and writes every requested product into `out_dir`.
/// The effective configuration is saved as `config.toml` next to them.
pub fn run(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunManifest, RunError> {
    cfg.build()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let started = Instant::now();
    let outputs = compute(cfg)?;
    let mut w = Writer {
        dir: out_dir,
        files: Vec::new(),
    };
    let canonical = cfg.to_toml();
    w.text("config.toml", "config", CONFIG_SCHEMA, &canonical)?;
    let wants = |p: Product| cfg.outputs.products.contains(&p);
    for g in &outputs.grids {
        if wants(Product::Image) {
            w.grid(
                &format!("{}_image", g.name),
                "image",
                &image_field(g),
                cfg.outputs.format,
            )?;
        }
        if let (true, Some(r)) = (wants(Product::Recovery), &g.recovery) {
            w.grid(
                &format!("{}_recovery", g.name),
                "recovery",
                &recovery_field(g, r),
                cfg.outputs.format,
            )?;
        }
        if wants(Product::Profiles) {
            for prof in &g.profiles {
                let name = format!("{}_profile_{}.csv", g.name, prof.label);
                let p = w.path(&name);
                write_profile(&p, &format!("{} along {}", g.name, prof.label), &prof.samples).map_err(io_err(&p))?;
                w.record(name, "profile", PROFILE_SCHEMA);
            }
        }
        if wants(Product::Ellipses) && g.recovery.is_some() {
            w.text(
                &format!("{}_ellipses.csv", g.name),
                "ellipses",
                ELLIPSE_SCHEMA,
                &ellipse_table(&g.ellipses),
            )?;
        }
    }
    if wants(Product::Report) {
        w.text("report.txt", "report", REPORT_SCHEMA, &report_text(cfg, &outputs))?;
    }
    let mut timings = outputs.timings;
    timings.push(Timing {
        stage: "total".into(),
        seconds: started.elapsed().as_secs_f64(),
    });
    let manifest = RunManifest::new(&canonical, w.files, timings);
    manifest.write(out_dir)?;
    Ok(manifest)
}
