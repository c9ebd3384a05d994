//! On-disk formats for gridded complex fields and 1D profiles.
//!
//! Both grid formats are documented in `docs/formats.md`.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use emkm_core::emcore::{Point3, C64};
use emkm_core::scene::{GridAxis, ImagingGrid};

pub const TEXT_SCHEMA: &str = "emkm-grid/1";
pub const PROFILE_SCHEMA: &str = "emkm-profile/1";
pub const BINARY_MAGIC: [u8; 4] = *b"EMKM";
pub const BINARY_VERSION: u32 = 1;

/// Complex components sampled on a grid, one row per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub grid: ImagingGrid,
    pub components: Vec<String>,
    /// `values[point][component]`.
    pub values: Vec<Vec<C64>>,
}

impl GridField {
    pub fn new(grid: ImagingGrid, components: Vec<String>, values: Vec<Vec<C64>>) -> io::Result<Self> {
        if values.len() != grid.len() || values.iter().any(|v| v.len() != components.len()) {
            return Err(invalid("field shape does not match grid and components"));
        }
        Ok(Self {
            grid,
            components,
            values,
        })
    }

    /// Structured grids have non-zero steps; point lists store a single
    /// axis with zero step.
    fn is_structured(&self) -> bool {
        let axes = self.grid.axes();
        !(axes.len() == 1 && axes[0].step == [0.0; 3] && axes[0].count > 1)
    }
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn fmt_point(p: &Point3) -> String {
    format!("{:e} {:e} {:e}", p[0], p[1], p[2])
}

fn parse_floats(s: &str) -> io::Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| invalid(format!("bad number `{t}`: {e}"))))
        .collect()
}

/// Writes the text form: `#` header lines, then a CSV table with columns
/// `x,y,z,<c>_re,<c>_im,...`.
pub fn write_text(path: &Path, field: &GridField) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# schema: {TEXT_SCHEMA}")?;
    writeln!(out, "# origin: {}", fmt_point(&field.grid.origin()))?;
    if field.is_structured() {
        for a in field.grid.axes() {
            writeln!(out, "# axis: {} {}", a.count, fmt_point(&a.step))?;
        }
    } else {
        writeln!(out, "# points: {}", field.grid.len())?;
    }
    writeln!(out, "# components: {}", field.components.join(" "))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x".to_string(), "y".into(), "z".into()];
    for c in &field.components {
        header.push(format!("{c}_re"));
        header.push(format!("{c}_im"));
    }
    w.write_record(&header)?;
    for (p, row) in field.grid.points().iter().zip(&field.values) {
        let mut rec: Vec<String> = p.iter().map(|v| format!("{v:e}")).collect();
        for z in row {
            rec.push(format!("{:e}", z.re));
            rec.push(format!("{:e}", z.im));
        }
        w.write_record(&rec)?;
    }
    w.flush()
}

pub fn read_text(path: &Path) -> io::Result<GridField> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut origin = None;
    let mut axes = Vec::new();
    let mut unstructured = false;
    let mut components = None;
    let mut line = String::new();
    let mut body = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let Some(rest) = line.strip_prefix('#') else {
            body.push_str(&line);
            break;
        };
        let (key, value) = rest.split_once(':').ok_or_else(|| invalid("malformed header line"))?;
        let value = value.trim();
        match key.trim() {
            "schema" if value != TEXT_SCHEMA => return Err(invalid(format!("unsupported schema `{value}`"))),
            "schema" => {}
            "origin" => {
                let v = parse_floats(value)?;
                origin = Some([v[0], v[1], v[2]]);
            }
            "axis" => {
                let v = parse_floats(value)?;
                if v.len() != 4 {
                    return Err(invalid("axis header needs count and 3 step values"));
                }
                axes.push(GridAxis {
                    step: [v[1], v[2], v[3]],
                    count: v[0] as usize,
                });
            }
            "points" => unstructured = true,
            "components" => components = Some(value.split_whitespace().map(String::from).collect::<Vec<_>>()),
            _ => {}
        }
    }
    reader.read_to_string(&mut body)?;
    let components = components.ok_or_else(|| invalid("missing components header"))?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let mut points = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let nums: Vec<f64> = rec
            .iter()
            .map(|t| t.parse::<f64>().map_err(|e| invalid(format!("bad number `{t}`: {e}"))))
            .collect::<io::Result<_>>()?;
        if nums.len() != 3 + 2 * components.len() {
            return Err(invalid("row width does not match components"));
        }
        points.push([nums[0], nums[1], nums[2]]);
        values.push(nums[3..].chunks(2).map(|c| C64::new(c[0], c[1])).collect());
    }
    let grid = if unstructured {
        ImagingGrid::from_points(points)
    } else {
        ImagingGrid::new(origin.ok_or_else(|| invalid("missing origin header"))?, axes)
    }
    .map_err(|e| invalid(e.to_string()))?;
    GridField::new(grid, components, values)
}

/// Writes the little-endian binary form.
pub fn write_binary(path: &Path, field: &GridField) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&BINARY_MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    let structured = field.is_structured();
    out.write_all(&u32::from(!structured).to_le_bytes())?;
    let axes = field.grid.axes();
    out.write_all(&(axes.len() as u32).to_le_bytes())?;
    for a in axes {
        out.write_all(&(a.count as u64).to_le_bytes())?;
    }
    out.write_all(&(field.components.len() as u32).to_le_bytes())?;
    for name in &field.components {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
    }
    let mut put = |v: f64| out.write_all(&v.to_le_bytes());
    for v in field.grid.origin() {
        put(v)?;
    }
    for a in axes {
        for v in a.step {
            put(v)?;
        }
    }
    if !structured {
        for p in field.grid.points() {
            for &v in p {
                put(v)?;
            }
        }
    }
    for row in &field.values {
        for z in row {
            put(z.re)?;
            put(z.im)?;
        }
    }
    out.flush()
}

struct LeReader<R>(R);

impl<R: Read> LeReader<R> {
    fn u32(&mut self) -> io::Result<u32> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64(&mut self) -> io::Result<u64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64(&mut self) -> io::Result<f64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
    fn point(&mut self) -> io::Result<Point3> {
        Ok([self.f64()?, self.f64()?, self.f64()?])
    }
}

pub fn read_binary(path: &Path) -> io::Result<GridField> {
    let mut r = LeReader(BufReader::new(File::open(path)?));
    let mut magic = [0u8; 4];
    r.0.read_exact(&mut magic)?;
    if magic != BINARY_MAGIC {
        return Err(invalid("bad magic"));
    }
    let version = r.u32()?;
    if version != BINARY_VERSION {
        return Err(invalid(format!("unsupported version {version}")));
    }
    let unstructured = r.u32()? != 0;
    let n_axes = r.u32()? as usize;
    let counts = (0..n_axes)
        .map(|_| r.u64().map(|c| c as usize))
        .collect::<io::Result<Vec<_>>>()?;
    let n_comp = r.u32()? as usize;
    let mut components = Vec::with_capacity(n_comp);
    for _ in 0..n_comp {
        let len = r.u32()? as usize;
        let mut b = vec![0u8; len];
        r.0.read_exact(&mut b)?;
        components.push(String::from_utf8(b).map_err(|e| invalid(e.to_string()))?);
    }
    let origin = r.point()?;
    let axes = counts
        .iter()
        .map(|&count| {
            Ok(GridAxis {
                step: r.point()?,
                count,
            })
        })
        .collect::<io::Result<Vec<_>>>()?;
    let total: usize = counts.iter().product();
    let grid = if unstructured {
        let pts = (0..total).map(|_| r.point()).collect::<io::Result<Vec<_>>>()?;
        ImagingGrid::from_points(pts)
    } else {
        ImagingGrid::new(origin, axes)
    }
    .map_err(|e| invalid(e.to_string()))?;
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        values.push(
            (0..n_comp)
                .map(|_| Ok(C64::new(r.f64()?, r.f64()?)))
                .collect::<io::Result<Vec<_>>>()?,
        );
    }
    GridField::new(grid, components, values)
}

/// Writes `(position, magnitude)` samples as CSV under a `#` header.
pub fn write_profile(path: &Path, title: &str, samples: &[(f64, f64)]) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# schema: {PROFILE_SCHEMA}")?;
    writeln!(out, "# profile: {title}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["position", "magnitude"])?;
    for (s, m) in samples {
        w.write_record([format!("{s:e}"), format!("{m:e}")])?;
    }
    w.flush()
}

pub fn read_profile(path: &Path) -> io::Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    rdr.deserialize().map(|r| r.map_err(io::Error::from)).collect()
}
