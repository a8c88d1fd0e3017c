//! Design matrices and response generation.
//!
//! A [`Design`] stores its values column-major: every operation in this
//! workspace (inner products with a residual, column norms, prefix
//! truncation) walks columns, not rows.

use std::io::Write;

use crate::error::{Error, Result};
use crate::rng::{replicate_stream, RngStream, StreamPurpose, DESIGN_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    /// Paired sine/cosine harmonics on a regular time grid.
    Trig,
    /// Independent standard normal entries.
    IidGaussian,
    /// Loaded from a user-supplied table.
    File,
    /// Product columns built by [`expand_interactions`].
    InteractionExpanded,
}

#[derive(Debug, Clone)]
pub struct Design {
    n: usize,
    p: usize,
    kind: DesignKind,
    labels: Vec<String>,
    /// Column-major, length n * p.
    values: Vec<f64>,
}

impl Design {
    pub fn from_columns(
        kind: DesignKind,
        n: usize,
        labels: Vec<String>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Design> {
        if n == 0 || columns.is_empty() {
            return Err(Error::Dimension("design must have rows and columns".into()));
        }
        if labels.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} columns",
                labels.len(),
                columns.len()
            )));
        }
        let p = columns.len();
        let mut values = Vec::with_capacity(n * p);
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Dimension(format!(
                    "column {j} has {} rows, expected {n}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "column {j} ({}) contains a non-finite value",
                    labels[j]
                )));
            }
            values.extend_from_slice(col);
        }
        Ok(Design {
            n,
            p,
            kind,
            labels,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.p)
            .map(|j| self.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// Inner product of column `j` with a vector of length n.
    pub fn column_dot(&self, j: usize, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.n);
        self.column(j).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Copy with every column scaled to unit Euclidean norm. Identically
    /// zero columns are left as-is: they stay inert rather than turning
    /// into amplified noise.
    pub fn normalized(&self) -> Design {
        let mut out = self.clone();
        for j in 0..self.p {
            let norm = self.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in &mut out.values[j * self.n..(j + 1) * self.n] {
                    *v /= norm;
                }
            }
        }
        out
    }

    /// The first `p` columns as a new design.
    pub fn prefix(&self, p: usize) -> Result<Design> {
        if p == 0 || p > self.p {
            return Err(Error::Dimension(format!(
                "prefix of {p} columns from a design with {}",
                self.p
            )));
        }
        Ok(Design {
            n: self.n,
            p,
            kind: self.kind,
            labels: self.labels[..p].to_vec(),
            values: self.values[..p * self.n].to_vec(),
        })
    }

    /// Row subset in the given order (indices may not repeat).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Design> {
        if rows.is_empty() {
            return Err(Error::Dimension("empty row selection".into()));
        }
        let mut seen = vec![false; self.n];
        for &r in rows {
            if r >= self.n {
                return Err(Error::Dimension(format!(
                    "row index {r} out of range for {} rows",
                    self.n
                )));
            }
            if seen[r] {
                return Err(Error::Dimension(format!("row index {r} repeated")));
            }
            seen[r] = true;
        }
        let mut values = Vec::with_capacity(rows.len() * self.p);
        for j in 0..self.p {
            let col = self.column(j);
            values.extend(rows.iter().map(|&r| col[r]));
        }
        Ok(Design {
            n: rows.len(),
            p: self.p,
            kind: self.kind,
            labels: self.labels.clone(),
            values,
        })
    }

    /// Fitted values X beta + intercept.
    pub fn predict(&self, coefs: &[f64], intercept: f64) -> Result<Vec<f64>> {
        if coefs.len() != self.p {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} columns",
                coefs.len(),
                self.p
            )));
        }
        let mut out = vec![intercept; self.n];
        for (j, &b) in coefs.iter().enumerate() {
            if b != 0.0 {
                for (o, &x) in out.iter_mut().zip(self.column(j)) {
                    *o += b * x;
                }
            }
        }
        Ok(out)
    }

    /// Headered CSV of the design values.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", self.labels.join(","))?;
        for i in 0..self.n {
            for j in 0..self.p {
                if j > 0 {
                    write!(w, ",")?;
                }
                write!(w, "{}", self.value(i, j))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Paired trigonometric design: columns 2j-1 and 2j (1-based) are
/// sin(2 pi j t_i) and cos(2 pi j t_i) on the grid t_i = (i-1)/n.
///
/// Every column is exactly orthogonal to the constant and to every other
/// column; squared norms are n/2, except at the Nyquist frequency j = n/2
/// (reached only when p = n, n even) where the sine column vanishes
/// identically and the cosine column has squared norm n. The vanished
/// sine is written as exact zeros and kept as an inert column so that
/// column indexing stays uniform; `normalize` leaves it untouched.
///
/// With `normalize`, columns are scaled to unit norm, making the Gram
/// matrix the identity (the zero column aside).
pub fn gen_trig_design(n: usize, p: usize, normalize: bool) -> Result<Design> {
    if n < 2 {
        return Err(Error::Dimension(format!("trig design needs n >= 2, got {n}")));
    }
    if p == 0 || p % 2 != 0 {
        return Err(Error::Dimension(format!(
            "trig design needs an even positive p, got {p}"
        )));
    }
    if p > n {
        return Err(Error::Dimension(format!(
            "trig design needs p <= n, got p = {p}, n = {n}"
        )));
    }
    let mut columns = Vec::with_capacity(p);
    let mut labels = Vec::with_capacity(p);
    for j in 1..=p / 2 {
        let nyquist = 2 * j == n;
        let mut sin_col = vec![0.0; n];
        let mut cos_col = vec![0.0; n];
        for (i, (s, c)) in sin_col.iter_mut().zip(cos_col.iter_mut()).enumerate() {
            let angle = 2.0 * std::f64::consts::PI * j as f64 * i as f64 / n as f64;
            *s = if nyquist { 0.0 } else { angle.sin() };
            *c = angle.cos();
        }
        labels.push(format!("sin{j}"));
        labels.push(format!("cos{j}"));
        columns.push(sin_col);
        columns.push(cos_col);
    }
    let design = Design::from_columns(DesignKind::Trig, n, labels, columns)?;
    Ok(if normalize { design.normalized() } else { design })
}

/// Design with iid standard normal entries, drawn from the design stream
/// of `master_seed`, filled column by column. Column-major filling means
/// the first p' columns coincide with a fresh (n, p') draw from the same
/// seed, so nested dimension grids share their common columns exactly.
pub fn gen_gaussian_design(n: usize, p: usize, master_seed: u64) -> Result<Design> {
    if n == 0 || p == 0 {
        return Err(Error::Dimension(format!(
            "gaussian design needs positive dimensions, got n = {n}, p = {p}"
        )));
    }
    let mut rng = RngStream::new(master_seed, DESIGN_STREAM);
    gaussian_design_from(&mut rng, n, p)
}

/// Same as [`gen_gaussian_design`] but drawing from a caller-owned stream
/// (used for per-replicate test designs).
pub fn gaussian_design_from(rng: &mut RngStream, n: usize, p: usize) -> Result<Design> {
    let labels = (1..=p).map(|j| format!("x{j}")).collect();
    let columns = (0..p).map(|_| rng.standard_normal_vec(n)).collect();
    Design::from_columns(DesignKind::IidGaussian, n, labels, columns)
}

/// Sparse generating model: nonzero coefficients on a few columns plus
/// iid Gaussian noise with variance `sigma2`.
#[derive(Debug, Clone)]
pub struct GeneratingModel {
    /// (column index, coefficient), sorted by index, no duplicates.
    coefficients: Vec<(usize, f64)>,
    sigma2: f64,
}

impl GeneratingModel {
    /// `sigma2 = 0` is allowed and means exact noiseless responses.
    pub fn new(coefficients: &[(usize, f64)], sigma2: f64) -> Result<GeneratingModel> {
        if coefficients.is_empty() {
            return Err(Error::Domain("generating model with no signal".into()));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::Domain(format!(
                "noise variance must be finite and >= 0, got {sigma2}"
            )));
        }
        let mut coefs = coefficients.to_vec();
        coefs.sort_by_key(|(j, _)| *j);
        for w in coefs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Domain(format!(
                    "duplicate coefficient for column {}",
                    w[0].0
                )));
            }
        }
        if coefs.iter().any(|(_, b)| *b == 0.0 || !b.is_finite()) {
            return Err(Error::Domain(
                "model coefficients must be nonzero and finite".into(),
            ));
        }
        Ok(GeneratingModel {
            coefficients: coefs,
            sigma2,
        })
    }

    /// Dense leading coefficients (convenience constructor): column j gets
    /// `beta[j]` for j < beta.len().
    pub fn from_dense(beta: &[f64], sigma2: f64) -> Result<GeneratingModel> {
        let coefs: Vec<(usize, f64)> = beta.iter().copied().enumerate().collect();
        GeneratingModel::new(&coefs, sigma2)
    }

    pub fn coefficients(&self) -> &[(usize, f64)] {
        &self.coefficients
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Number of active coefficients.
    pub fn p0(&self) -> usize {
        self.coefficients.len()
    }

    /// Copy with a different noise variance (same signal).
    pub fn with_sigma2(&self, sigma2: f64) -> Result<GeneratingModel> {
        GeneratingModel::new(&self.coefficients, sigma2)
    }

    /// Noiseless mean X beta0 on the given design.
    pub fn mu(&self, design: &Design) -> Result<Vec<f64>> {
        let mut mu = vec![0.0; design.n()];
        for &(j, b) in &self.coefficients {
            if j >= design.p() {
                return Err(Error::Dimension(format!(
                    "model coefficient on column {j}, design has {}",
                    design.p()
                )));
            }
            for (m, &x) in mu.iter_mut().zip(design.column(j)) {
                *m += b * x;
            }
        }
        Ok(mu)
    }
}

/// One simulated response vector together with its noiseless mean and
/// the addressing that regenerates it.
#[derive(Debug, Clone)]
pub struct Realization {
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    pub master_seed: u64,
    pub replicate: u64,
}

impl Realization {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "y,mu")?;
        for (y, mu) in self.y.iter().zip(&self.mu) {
            writeln!(w, "{y},{mu}")?;
        }
        Ok(())
    }
}

/// Draw y = mu + sigma * eps with eps from the training-noise stream of
/// `replicate`. The standard normals are scaled by sigma at the point of
/// use, so realizations at different noise variances from the same seed
/// and replicate share their underlying draws.
pub fn gen_response(
    design: &Design,
    model: &GeneratingModel,
    master_seed: u64,
    replicate: u64,
) -> Result<Realization> {
    let mu = model.mu(design)?;
    let sigma = model.sigma2().sqrt();
    let mut stream = RngStream::new(
        master_seed,
        replicate_stream(replicate, StreamPurpose::TrainingNoise),
    );
    let y = mu.iter().map(|&m| m + sigma * stream.standard_normal()).collect();
    Ok(Realization {
        y,
        mu,
        master_seed,
        replicate,
    })
}

/// All products of `order` distinct base columns, for orders 1 through
/// `max_order`, enumerated order by order and lexicographically within an
/// order. Output columns are scaled to unit norm (identically zero
/// products stay zero) and labeled by joining base labels with `:`.
pub fn expand_interactions(base: &Design, max_order: usize) -> Result<Design> {
    if max_order == 0 || max_order > base.p() {
        return Err(Error::Dimension(format!(
            "interaction order must lie in 1..={}, got {max_order}",
            base.p()
        )));
    }
    let n = base.n();
    let mut labels = Vec::new();
    let mut columns = Vec::new();
    let mut combo: Vec<usize> = Vec::new();
    for order in 1..=max_order {
        combo.clear();
        combo.extend(0..order);
        loop {
            let mut col = base.column(combo[0]).to_vec();
            for &j in &combo[1..] {
                for (c, &x) in col.iter_mut().zip(base.column(j)) {
                    *c *= x;
                }
            }
            labels.push(
                combo
                    .iter()
                    .map(|&j| base.labels()[j].as_str())
                    .collect::<Vec<_>>()
                    .join(":"),
            );
            columns.push(col);
            // Next lexicographic combination of `order` indices out of p.
            let mut k = order;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                if combo[k] + 1 <= base.p() - (order - k) {
                    combo[k] += 1;
                    for t in k + 1..order {
                        combo[t] = combo[t - 1] + 1;
                    }
                    break;
                }
                if k == 0 {
                    combo.clear();
                    break;
                }
            }
            if combo.is_empty() {
                break;
            }
        }
    }
    let design = Design::from_columns(DesignKind::InteractionExpanded, n, labels, columns)?;
    Ok(design.normalized())
}
