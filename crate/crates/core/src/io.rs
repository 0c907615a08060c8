//! File formats: point and function CSVs, serialized systems and pairs,
//! weight matrices, landmarks, connections and report output.

use crate::digraph::DirectedPair;
use crate::error::{Error, Result};
use crate::filters::{from_profile, LowPassFilter, Profile};
use crate::system::{AdmissibleSystem, FunctionSamples, Metric, Provenance};
use crate::twosys::{ConnectionEntry, ConnectionMatrix, LandmarkSet};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Numeric rows of a CSV file with their 1-based line numbers.
struct Table {
    header: Option<Vec<String>>,
    rows: Vec<(usize, Vec<String>)>,
}

/// The first row is a header when any of its fields is not a number.
fn parse_table(text: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut header = None;
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        if header.is_none() && rows.is_empty() && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            header = Some(fields.iter().map(|f| f.to_ascii_lowercase()).collect());
            continue;
        }
        rows.push((line, fields));
    }
    Ok(Table { header, rows })
}

fn num(line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| Error::Parse(format!("line {line}: {what} {field:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: {what} is not finite")));
    }
    Ok(v)
}

fn index(line: usize, field: &str, what: &str) -> Result<usize> {
    field.parse().map_err(|_| Error::Parse(format!("line {line}: {what} {field:?} is not a nonnegative integer")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
}

/// One row per point; a column headed `weight` holds the measure.
pub fn read_points_csv(path: &Path) -> Result<PointCloud> {
    parse_points(&fs::read_to_string(path)?)
}

pub fn parse_points(text: &str) -> Result<PointCloud> {
    let t = parse_table(text)?;
    let wcol = t.header.as_ref().and_then(|h| h.iter().position(|c| c == "weight"));
    let mut points = Vec::with_capacity(t.rows.len());
    let mut weights = Vec::new();
    for (line, fields) in &t.rows {
        let mut p = Vec::with_capacity(fields.len());
        for (c, f) in fields.iter().enumerate() {
            let v = num(*line, f, "coordinate")?;
            if Some(c) == wcol {
                weights.push(v);
            } else {
                p.push(v);
            }
        }
        if wcol.is_some() && weights.len() != points.len() + 1 {
            return Err(Error::Parse(format!("line {line}: missing weight")));
        }
        if let Some(first) = points.first().map(Vec::len) {
            if first != p.len() {
                return Err(Error::Parse(format!("line {line}: expected {first} coordinates, got {}", p.len())));
            }
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(Error::Parse("no points".into()));
    }
    Ok(PointCloud { points, weights: wcol.map(|_| weights) })
}

/// Square dense matrix, one row per line.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let t = parse_table(text)?;
    let n = t.rows.len();
    if n == 0 {
        return Err(Error::Parse("empty matrix".into()));
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, (line, fields)) in t.rows.iter().enumerate() {
        if fields.len() != n {
            return Err(Error::Parse(format!("line {line}: expected {n} entries, got {}", fields.len())));
        }
        for (j, f) in fields.iter().enumerate() {
            m[(i, j)] = num(*line, f, "entry")?;
        }
    }
    Ok(m)
}

/// `src, dst, weight` rows densified to an `N x N` matrix; `N` defaults to the
/// largest index plus one. Repeated edges add up.
pub fn read_edge_list_csv(path: &Path, n: Option<usize>) -> Result<DMatrix<f64>> {
    parse_edge_list(&fs::read_to_string(path)?, n)
}

pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<DMatrix<f64>> {
    let t = parse_table(text)?;
    let mut edges = Vec::with_capacity(t.rows.len());
    for (line, fields) in &t.rows {
        if fields.len() < 3 || fields[2].is_empty() {
            return Err(Error::Parse(format!("line {line}: missing weight")));
        }
        if fields.len() > 3 {
            return Err(Error::Parse(format!("line {line}: expected 3 columns, got {}", fields.len())));
        }
        edges.push((
            index(*line, &fields[0], "source")?,
            index(*line, &fields[1], "target")?,
            num(*line, &fields[2], "weight")?,
        ));
    }
    let size = edges.iter().map(|e| e.0.max(e.1) + 1).max().unwrap_or(0);
    let n = match n {
        Some(n) if n < size => return Err(Error::Parse(format!("edge index {} exceeds N = {n}", size - 1))),
        Some(n) => n,
        None => size,
    };
    if n == 0 {
        return Err(Error::Parse("no edges".into()));
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, j, w) in edges {
        m[(i, j)] += w;
    }
    Ok(m)
}

/// One value per line: `re` or `re, im`.
pub fn read_function_csv(path: &Path) -> Result<FunctionSamples> {
    parse_function(&fs::read_to_string(path)?)
}

pub fn parse_function(text: &str) -> Result<FunctionSamples> {
    let t = parse_table(text)?;
    let mut v = Vec::with_capacity(t.rows.len());
    for (line, fields) in &t.rows {
        let z = match fields.as_slice() {
            [re] => Complex64::new(num(*line, re, "value")?, 0.0),
            [re, im] => Complex64::new(num(*line, re, "real part")?, num(*line, im, "imaginary part")?),
            _ => return Err(Error::Parse(format!("line {line}: expected 1 or 2 columns"))),
        };
        v.push(z);
    }
    Ok(FunctionSamples::from_vec(v))
}

pub fn write_function_csv(path: &Path, f: &FunctionSamples) -> Result<()> {
    let mut out = String::from("re,im\n");
    for z in f.iter() {
        out.push_str(&format!("{},{}\n", z.re, z.im));
    }
    fs::write(path, out)?;
    Ok(())
}

/// `index_in_1, index_in_2, nu_weight`; weights are rescaled to sum to one.
pub fn read_landmarks_csv(path: &Path) -> Result<LandmarkSet> {
    parse_landmarks(&fs::read_to_string(path)?)
}

pub fn parse_landmarks(text: &str) -> Result<LandmarkSet> {
    let t = parse_table(text)?;
    let (mut a, mut b, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for (line, fields) in &t.rows {
        if fields.len() != 3 {
            return Err(Error::Parse(format!("line {line}: expected index_in_1, index_in_2, nu_weight")));
        }
        a.push(index(*line, &fields[0], "index_in_1")?);
        b.push(index(*line, &fields[1], "index_in_2")?);
        w.push(num(*line, &fields[2], "nu_weight")?);
    }
    if w.is_empty() {
        return Err(Error::Parse("landmark file has no rows".into()));
    }
    LandmarkSet::normalized(a, b, w)
}

type ComplexPair = [f64; 2];

fn pair_of(z: Complex64) -> ComplexPair {
    [z.re, z.im]
}

fn rows_of(m: &DMatrix<Complex64>) -> Vec<Vec<ComplexPair>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| pair_of(m[(i, j)])).collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<ComplexPair>], expect_rows: usize, what: &str) -> Result<DMatrix<Complex64>> {
    if rows.len() != expect_rows {
        return Err(Error::Parse(format!("{what}: expected {expect_rows} rows, got {}", rows.len())));
    }
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(r) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::Parse(format!("{what}: row {r} has {} entries, expected {cols}", rows[r].len())));
    }
    Ok(DMatrix::from_fn(expect_rows, cols, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum MetricDoc {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

impl MetricDoc {
    fn from_metric(m: &Metric) -> Self {
        match m {
            Metric::Euclidean => MetricDoc::Named("euclidean".into()),
            Metric::Circle => MetricDoc::Named("circle".into()),
            Metric::Sphere => MetricDoc::Named("sphere".into()),
            Metric::Discrete => MetricDoc::Named("discrete".into()),
            Metric::Matrix(d) => {
                MetricDoc::Matrix((0..d.nrows()).map(|i| d.row(i).iter().copied().collect()).collect())
            }
        }
    }

    fn to_metric(&self) -> Result<Metric> {
        match self {
            MetricDoc::Named(s) => match s.as_str() {
                "euclidean" => Ok(Metric::Euclidean),
                "circle" => Ok(Metric::Circle),
                "sphere" => Ok(Metric::Sphere),
                "discrete" => Ok(Metric::Discrete),
                other => Err(Error::Parse(format!("unknown metric {other:?}"))),
            },
            MetricDoc::Matrix(rows) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Parse("metric matrix is not square".into()));
                }
                Ok(Metric::Matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
            }
        }
    }
}

/// Serialized form of an [`AdmissibleSystem`]; eigenfunctions are stored row
/// by row (one row per point) as `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemDoc {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    eigenfunctions: Vec<Vec<ComplexPair>>,
    metric: MetricDoc,
    pub provenance: Provenance,
}

impl SystemDoc {
    pub fn from_system(sys: &AdmissibleSystem) -> Self {
        Self {
            points: sys.points().to_vec(),
            weights: sys.weights().to_vec(),
            eigenvalues: sys.eigenvalues().to_vec(),
            eigenfunctions: rows_of(sys.eigenfunctions()),
            metric: MetricDoc::from_metric(sys.metric()),
            provenance: sys.provenance(),
        }
    }

    pub fn to_system(&self) -> Result<AdmissibleSystem> {
        let phi = matrix_from_rows(&self.eigenfunctions, self.points.len(), "eigenfunctions")?;
        if phi.ncols() != self.eigenvalues.len() {
            return Err(Error::Parse(format!(
                "eigenfunctions have {} columns but there are {} eigenvalues",
                phi.ncols(),
                self.eigenvalues.len()
            )));
        }
        AdmissibleSystem::new(
            self.points.clone(),
            self.metric.to_metric()?,
            self.weights.clone(),
            self.eigenvalues.clone(),
            phi,
            self.provenance,
        )
    }
}

pub fn system_to_json(sys: &AdmissibleSystem) -> Result<String> {
    serde_json::to_string(&SystemDoc::from_system(sys)).map_err(|e| Error::Parse(e.to_string()))
}

pub fn system_from_json(text: &str) -> Result<AdmissibleSystem> {
    from_json::<SystemDoc>(text)?.to_system()
}

pub fn write_system(path: &Path, sys: &AdmissibleSystem) -> Result<()> {
    fs::write(path, system_to_json(sys)?)?;
    Ok(())
}

pub fn read_system(path: &Path) -> Result<AdmissibleSystem> {
    system_from_json(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairDoc {
    pub base: SystemDoc,
    pub dual: SystemDoc,
    isometry: Vec<Vec<ComplexPair>>,
    pub non_unique_isometry: bool,
    pub singular_values: Vec<f64>,
    /// `phi = psi`, as produced by a symmetric PSD kernel.
    pub undirected_degenerate: bool,
}

/// Tolerance for flagging a pair as undirected-degenerate.
pub const DEGENERATE_TOL: f64 = 1e-8;

pub fn pair_to_json(pair: &DirectedPair) -> Result<String> {
    let doc = PairDoc {
        base: SystemDoc::from_system(&pair.base),
        dual: SystemDoc::from_system(&pair.dual),
        isometry: rows_of(&pair.isometry),
        non_unique_isometry: pair.non_unique_isometry,
        singular_values: pair.singular_values.clone(),
        undirected_degenerate: pair.is_degenerate(DEGENERATE_TOL),
    };
    serde_json::to_string(&doc).map_err(|e| Error::Parse(e.to_string()))
}

pub fn pair_from_json(text: &str) -> Result<DirectedPair> {
    let doc: PairDoc = from_json(text)?;
    let base = doc.base.to_system()?;
    let dual = doc.dual.to_system()?;
    if base.len() != dual.len() || base.eigenvalues() != dual.eigenvalues() {
        return Err(Error::Parse("pair systems disagree on points or eigenvalues".into()));
    }
    let isometry = matrix_from_rows(&doc.isometry, base.len(), "isometry")?;
    if isometry.ncols() != base.len() {
        return Err(Error::Parse("isometry is not square".into()));
    }
    Ok(DirectedPair {
        base,
        dual,
        isometry,
        non_unique_isometry: doc.non_unique_isometry,
        singular_values: doc.singular_values,
    })
}

/// Either a single system or a directed pair, told apart by the document shape.
#[derive(Debug, Clone)]
pub enum Loaded {
    System(AdmissibleSystem),
    Pair(Box<DirectedPair>),
}

pub fn read_system_or_pair(path: &Path) -> Result<Loaded> {
    let text = fs::read_to_string(path)?;
    let v: serde_json::Value = from_json(&text)?;
    if v.get("base").is_some() {
        Ok(Loaded::Pair(Box::new(pair_from_json(&text)?)))
    } else {
        Ok(Loaded::System(system_from_json(&text)?))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EntryDoc {
    j: usize,
    k: usize,
    re: f64,
    #[serde(default)]
    im: f64,
    #[serde(default)]
    ell: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConnectionDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cols: Option<usize>,
    entries: Vec<EntryDoc>,
}

pub fn connection_to_json(a: &ConnectionMatrix) -> Result<String> {
    let doc = ConnectionDoc {
        rows: Some(a.rows()),
        cols: Some(a.cols()),
        entries: a
            .entries()
            .iter()
            .map(|e| EntryDoc { j: e.j, k: e.k, re: e.value.re, im: e.value.im, ell: e.ell })
            .collect(),
    };
    serde_json::to_string(&doc).map_err(|e| Error::Parse(e.to_string()))
}

/// `rows`/`cols` in the document take precedence over the given shape.
pub fn connection_from_json(text: &str, rows: usize, cols: usize) -> Result<ConnectionMatrix> {
    let doc: ConnectionDoc = from_json(text)?;
    let entries = doc
        .entries
        .iter()
        .map(|e| ConnectionEntry { j: e.j, k: e.k, value: Complex64::new(e.re, e.im), ell: e.ell })
        .collect();
    ConnectionMatrix::new(doc.rows.unwrap_or(rows), doc.cols.unwrap_or(cols), entries)
}

/// `level, point, re, im` for every sample of every level.
pub fn write_pyramid_csv(path: &Path, taus: &[FunctionSamples]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "level,point,re,im")?;
    for (j, t) in taus.iter().enumerate() {
        for (i, z) in t.iter().enumerate() {
            writeln!(out, "{j},{i},{},{}", z.re, z.im)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub order: u32,
    #[serde(default = "default_profile")]
    pub profile: Profile,
}

fn default_profile() -> Profile {
    Profile::SmoothedPolynomial
}

impl FilterConfig {
    pub fn build(&self) -> Result<LowPassFilter> {
        from_profile(self.profile, self.order)
    }
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("line {}: {e}", e.line())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::{build_directed_pair, to_complex};
    use crate::jacobi::build_circle_system;

    #[test]
    fn points_with_and_without_weights() {
        let p = parse_points("x,y,weight\n0,1,0.5\n2,3,0.5\n").unwrap();
        assert_eq!(p.points, vec![vec![0.0, 1.0], vec![2.0, 3.0]]);
        assert_eq!(p.weights, Some(vec![0.5, 0.5]));
        let p = parse_points("1.5\n2.5\n").unwrap();
        assert_eq!(p.points.len(), 2);
        assert!(p.weights.is_none());
        assert!(parse_points("x,y\n1,2\n3\n").is_err());
        assert!(parse_points("x\n1\nabc\n").is_err());
        assert!(parse_points("").is_err());
    }

    #[test]
    fn edge_list_reports_line_of_missing_weight() {
        let m = parse_edge_list("src,dst,weight\n0,1,2.0\n1,2,0.5\n1,2,0.5\n", None).unwrap();
        assert_eq!(m.nrows(), 3);
        assert_eq!(m[(1, 2)], 1.0);
        match parse_edge_list("src,dst,weight\n0,1,2.0\n1,2\n", None) {
            Err(Error::Parse(msg)) => assert!(msg.contains("line 3"), "{msg}"),
            other => panic!("{other:?}"),
        }
        match parse_edge_list("0,1,2.0\n1,2,\n", None) {
            Err(Error::Parse(msg)) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(parse_edge_list("0,5,1\n", Some(3)).is_err());
    }

    #[test]
    fn dense_matrix_must_be_square() {
        let m = parse_matrix("1,2\n3,4\n").unwrap();
        assert_eq!(m[(1, 0)], 3.0);
        assert!(parse_matrix("1,2\n3\n").is_err());
    }

    #[test]
    fn functions_and_landmarks() {
        let f = parse_function("re,im\n1,2\n3,-1\n").unwrap();
        assert_eq!(f[1], Complex64::new(3.0, -1.0));
        let f = parse_function("1\n2\n").unwrap();
        assert_eq!(f[0], Complex64::new(1.0, 0.0));
        let l = parse_landmarks("index_in_1,index_in_2,nu_weight\n0,3,1\n2,1,3\n").unwrap();
        assert_eq!(l.indices_in_2(), &[3, 1]);
        assert_eq!(l.nu_weights(), &[0.25, 0.75]);
        assert!(parse_landmarks("index_in_1,index_in_2,nu_weight\n").is_err());
    }

    #[test]
    fn system_round_trip_is_bit_identical() {
        let s = build_circle_system(37, 9).unwrap();
        let back = system_from_json(&system_to_json(&s).unwrap()).unwrap();
        assert_eq!(back.eigenvalues(), s.eigenvalues());
        assert_eq!(back.eigenfunctions(), s.eigenfunctions());
        assert_eq!(back.weights(), s.weights());
        assert_eq!(back.metric(), s.metric());
        assert_eq!(back.provenance(), s.provenance());
    }

    #[test]
    fn pair_round_trip_and_degenerate_flag() {
        let w = DMatrix::from_fn(6, 6, |i, j| 1.0 / (1.0 + (i as f64 - j as f64).abs()));
        let pair = build_directed_pair(&to_complex(&w), 6).unwrap();
        let text = pair_to_json(&pair).unwrap();
        assert!(text.contains("\"undirected_degenerate\":true"));
        let back = pair_from_json(&text).unwrap();
        assert_eq!(back.base.eigenfunctions(), pair.base.eigenfunctions());
        assert_eq!(back.isometry, pair.isometry);
    }

    #[test]
    fn connection_round_trip() {
        let a = ConnectionMatrix::new(
            2,
            3,
            vec![
                ConnectionEntry { j: 1, k: 2, value: Complex64::new(0.5, -1.0), ell: Some(2.0) },
                ConnectionEntry { j: 0, k: 0, value: Complex64::new(1.0, 0.0), ell: None },
            ],
        )
        .unwrap();
        let back = connection_from_json(&connection_to_json(&a).unwrap(), 0, 0).unwrap();
        assert_eq!(back, a);
        let b = connection_from_json(r#"{"entries":[{"j":0,"k":1,"re":2.0}]}"#, 2, 2).unwrap();
        assert_eq!(b.get(0, 1), Complex64::new(2.0, 0.0));
        assert!(connection_from_json(r#"{"entries":[{"j":5,"k":1,"re":2.0}]}"#, 2, 2).is_err());
    }

    #[test]
    fn filter_config_parses() {
        #[derive(Deserialize)]
        struct Doc {
            filter: FilterConfig,
        }
        let d: Doc = from_json(r#"{"filter":{"order":4,"profile":"smoothed-polynomial"}}"#).unwrap();
        assert_eq!(d.filter.build().unwrap().smoothness_order(), 4);
        let d: Doc = from_json(r#"{"filter":{"order":0,"profile":"cutoff"}}"#).unwrap();
        assert!(!d.filter.build().unwrap().is_smooth());
        assert!(from_json::<Doc>(r#"{"filter":{"order":2,"profile":"box"}}"#).is_err());
    }
}
