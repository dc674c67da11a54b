//! LIBSVM-format ingestion and the ℓ2-regularized logistic-regression
//! problem built on top of it: stochastic/full gradients, the deterministic
//! full-gradient reference solver, and the smoothness/noise estimates that
//! feed the recurrence bounds.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::Rng;

use crate::engine::{GradientOracle, RunRng};
use crate::error::{Error, Result};

/// Sparse rows with ±1 labels. Feature indices are 1-based in files and
/// 0-based here; `dim` is the largest 1-based index seen.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<(u32, f64)>>,
    pub labels: Vec<f64>,
    pub dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// max_i ‖x_i‖².
    pub fn max_row_norm_sq(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|(_, v)| v * v).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

fn normalize_label(raw: f64, line: u64) -> Result<f64> {
    if raw == 1.0 {
        Ok(1.0)
    } else if raw == -1.0 {
        Ok(-1.0)
    } else if raw == 0.0 {
        // 0/1-labelled files map 0 to the negative class
        Ok(-1.0)
    } else {
        Err(Error::parse(line, format!("non-binary label {raw}")))
    }
}

/// Parses LIBSVM text: one `label idx:val idx:val …` row per nonempty line,
/// `#` comments stripped, repeated whitespace tolerated, indices strictly
/// increasing within a line.
pub fn parse_libsvm<R: Read>(input: R) -> Result<Dataset> {
    let reader = BufReader::new(input);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line?;
        let data = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = data.split_whitespace();
        let label_tok = match tokens.next() {
            Some(t) => t,
            None => continue, // blank or comment-only line
        };
        let raw: f64 = label_tok
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad label token `{label_tok}`")))?;
        labels.push(normalize_label(raw, line_no)?);

        let mut row: Vec<(u32, f64)> = Vec::new();
        for tok in tokens {
            let (i_str, v_str) = tok
                .split_once(':')
                .ok_or_else(|| Error::parse(line_no, format!("bad feature token `{tok}`")))?;
            let file_idx: u32 = i_str
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad feature index `{i_str}`")))?;
            if file_idx == 0 {
                return Err(Error::parse(
                    line_no,
                    "feature indices are 1-based".to_string(),
                ));
            }
            let value: f64 = v_str
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad feature value `{v_str}`")))?;
            if let Some(&(prev, _)) = row.last() {
                if file_idx - 1 <= prev {
                    return Err(Error::parse(
                        line_no,
                        format!("nonincreasing feature index {file_idx}"),
                    ));
                }
            }
            dim = dim.max(file_idx as usize);
            row.push((file_idx - 1, value));
        }
        rows.push(row);
    }
    Ok(Dataset { rows, labels, dim })
}

/// Opens a LIBSVM file, transparently gunzipping when the name ends in `.gz`.
pub fn read_libsvm_path(path: &Path) -> Result<Dataset> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        parse_libsvm(flate2::read::GzDecoder::new(file))
    } else {
        parse_libsvm(file)
    }
}

/// Canonical text form: `+1`/`-1` labels, 1-based indices, shortest
/// round-trip float rendering. `parse_libsvm ∘ serialize_libsvm` is the
/// identity, and serialize-after-parse is the identity on canonical input.
pub fn serialize_libsvm(data: &Dataset) -> String {
    let mut out = String::new();
    for (row, &label) in data.rows.iter().zip(&data.labels) {
        out.push_str(if label > 0.0 { "+1" } else { "-1" });
        for &(i, v) in row {
            out.push_str(&format!(" {}:{}", i + 1, v));
        }
        out.push('\n');
    }
    out
}

/// min_w (1/n)Σ log(1 + exp(−yᵢxᵢᵀw)) + (λ/2)‖w‖² with λ = 1/n, so
/// μ = λ and L = maxᵢ‖xᵢ‖²/4 + λ.
#[derive(Debug, Clone)]
pub struct LogRegProblem {
    pub data: Dataset,
    pub lambda: f64,
    pub mu: f64,
    pub l: f64,
    pub w_star: Option<Vec<f64>>,
    pub f_star: Option<f64>,
}

/// Numerically stable σ(−z) = 1/(1 + eᶻ).
fn sigmoid_neg(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// log(1 + exp(u)) without overflow.
fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

impl LogRegProblem {
    pub fn new(data: Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid_param("dataset", "dataset must be nonempty"));
        }
        let lambda = 1.0 / data.len() as f64;
        let l = estimate_smoothness_raw(&data, lambda);
        Ok(LogRegProblem {
            data,
            lambda,
            mu: lambda,
            l,
            w_star: None,
            f_star: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.data.dim
    }

    fn margin(&self, w: &[f64], i: usize) -> f64 {
        let dot: f64 = self.data.rows[i]
            .iter()
            .map(|&(j, v)| v * w[j as usize])
            .sum();
        self.data.labels[i] * dot
    }

    /// ∇fᵢ(w) = −yᵢ·σ(−yᵢxᵢᵀw)·xᵢ + λw, returned dense (the xᵢ part only
    /// touches the row's nonzeros; the regularizer is dense regardless).
    pub fn gradient(&self, w: &[f64], i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.gradient_into(w, i, &mut out);
        out
    }

    pub fn gradient_into(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let coeff = -self.data.labels[i] * sigmoid_neg(self.margin(w, i));
        for (o, wi) in out.iter_mut().zip(w) {
            *o = self.lambda * wi;
        }
        for &(j, v) in &self.data.rows[i] {
            out[j as usize] += coeff * v;
        }
    }

    pub fn full_gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.data.len() as f64;
        let mut out: Vec<f64> = w.iter().map(|wi| self.lambda * wi).collect();
        for i in 0..self.data.len() {
            let coeff = -self.data.labels[i] * sigmoid_neg(self.margin(w, i)) / n;
            for &(j, v) in &self.data.rows[i] {
                out[j as usize] += coeff * v;
            }
        }
        out
    }

    pub fn objective(&self, w: &[f64]) -> f64 {
        let n = self.data.len() as f64;
        let loss: f64 = (0..self.data.len())
            .map(|i| softplus(-self.margin(w, i)))
            .sum::<f64>()
            / n;
        let reg = 0.5 * self.lambda * w.iter().map(|x| x * x).sum::<f64>();
        loss + reg
    }

    /// Component objective fᵢ(w) = log(1+exp(−yᵢxᵢᵀw)) + (λ/2)‖w‖².
    pub fn component_objective(&self, w: &[f64], i: usize) -> f64 {
        softplus(-self.margin(w, i)) + 0.5 * self.lambda * w.iter().map(|x| x * x).sum::<f64>()
    }

    /// Deterministic full-gradient descent with fixed step 1/L from w = 0,
    /// stopping at ‖∇F‖² ≤ tol or the iteration cap.
    pub fn solve_reference(&self, tol: f64) -> ReferenceSolution {
        const CAP: u64 = 10_000_000;
        let mut w = vec![0.0; self.dim()];
        let step = 1.0 / self.l;
        let mut iterations = 0u64;
        loop {
            let grad = self.full_gradient(&w);
            let gnorm: f64 = grad.iter().map(|g| g * g).sum();
            if gnorm <= tol || iterations >= CAP {
                return ReferenceSolution {
                    f: self.objective(&w),
                    w,
                    grad_norm_sq: gnorm,
                    iterations,
                    converged: gnorm <= tol,
                };
            }
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi -= step * gi;
            }
            iterations += 1;
        }
    }

    pub fn set_reference(&mut self, sol: &ReferenceSolution) {
        self.w_star = Some(sol.w.clone());
        self.f_star = Some(sol.f);
    }

    /// N̂ = (2/n)Σᵢ‖∇fᵢ(w)‖², the noise constant estimated at `w`
    /// (normally the reference optimum).
    pub fn estimate_noise(&self, w: &[f64]) -> f64 {
        let n = self.data.len() as f64;
        let reg_norm_sq: f64 = w.iter().map(|x| x * x).sum::<f64>() * self.lambda * self.lambda;
        let mut total = 0.0;
        for i in 0..self.data.len() {
            let coeff = -self.data.labels[i] * sigmoid_neg(self.margin(w, i));
            let row = &self.data.rows[i];
            let row_norm_sq: f64 = row.iter().map(|&(_, v)| v * v).sum();
            let dot_wx: f64 = row.iter().map(|&(j, v)| v * w[j as usize]).sum();
            total += reg_norm_sq + 2.0 * self.lambda * coeff * dot_wx + coeff * coeff * row_norm_sq;
        }
        2.0 * total / n
    }
}

/// L = maxᵢ‖xᵢ‖²/4 + λ (the logistic second derivative is capped at 1/4).
pub fn estimate_smoothness(p: &LogRegProblem) -> f64 {
    estimate_smoothness_raw(&p.data, p.lambda)
}

fn estimate_smoothness_raw(data: &Dataset, lambda: f64) -> f64 {
    data.max_row_norm_sq() / 4.0 + lambda
}

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub w: Vec<f64>,
    pub f: f64,
    pub grad_norm_sq: f64,
    pub iterations: u64,
    pub converged: bool,
}

/// Engine adapter sampling one row uniformly per step.
pub struct LogRegOracle<'a> {
    problem: &'a LogRegProblem,
}

impl<'a> LogRegOracle<'a> {
    pub fn new(problem: &'a LogRegProblem) -> Self {
        LogRegOracle { problem }
    }
}

impl GradientOracle for LogRegOracle<'_> {
    fn dimension(&self) -> usize {
        self.problem.dim()
    }

    fn stochastic_gradient(&self, w: &[f64], rng: &mut RunRng, out: &mut [f64]) {
        let i = rng.gen_range(0..self.problem.data.len());
        self.problem.gradient_into(w, i, out);
    }

    fn full_gradient(&self, w: &[f64], out: &mut [f64]) -> bool {
        out.copy_from_slice(&self.problem.full_gradient(w));
        true
    }

    fn reference_optimum(&self) -> Option<&[f64]> {
        self.problem.w_star.as_deref()
    }

    fn objective(&self, w: &[f64]) -> Option<f64> {
        Some(self.problem.objective(w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn parse_str(s: &str) -> Result<Dataset> {
        parse_libsvm(s.as_bytes())
    }

    #[test]
    fn parse_basic_row() {
        let d = parse_str("+1 1:0.5 3:2\n").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.labels, vec![1.0]);
        assert_eq!(d.rows[0], vec![(0, 0.5), (2, 2.0)]);
        assert!(d.dim >= 3);
    }

    #[test]
    fn parse_zero_one_labels() {
        let d = parse_str("0 2:1\n1 1:1\n").unwrap();
        assert_eq!(d.labels, vec![-1.0, 1.0]);
    }

    #[test]
    fn parse_comments_and_whitespace() {
        let d = parse_str("+1   1:1    2:3   # trailing comment\n\n# whole-line comment\n-1 1:2\n")
            .unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.rows[0], vec![(0, 1.0), (1, 3.0)]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_str("+1 1:1\n-1 oops\n").unwrap_err();
        assert!(err.to_string().starts_with("line 2:"), "{err}");
        let err = parse_str("+1 3:1 2:1\n").unwrap_err();
        assert!(err.to_string().contains("nonincreasing"), "{err}");
        let err = parse_str("5 1:1\n").unwrap_err();
        assert!(err.to_string().contains("non-binary label"), "{err}");
        assert!(parse_str("+1 0:1\n").is_err());
    }

    #[test]
    fn serialize_round_trip_on_canonical_fixture() {
        let fixture = include_str!("../tests/data/canonical100.libsvm");
        assert_eq!(fixture.lines().count(), 100);
        let parsed = parse_libsvm(fixture.as_bytes()).unwrap();
        assert_eq!(serialize_libsvm(&parsed), fixture);
    }

    #[test]
    fn gzip_transparent_read() {
        use flate2::write::GzEncoder;
        use flate2::Compression;
        use std::io::Write;
        let text = "+1 1:0.5\n-1 2:1\n";
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(text.as_bytes()).unwrap();
        let bytes = enc.finish().unwrap();
        let dir = std::env::temp_dir().join("stepsize-lab-test-gz");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tiny.libsvm.gz");
        std::fs::write(&path, &bytes).unwrap();
        let d = read_libsvm_path(&path).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d, parse_str(text).unwrap());
    }

    fn fixture_problem() -> LogRegProblem {
        let data = parse_libsvm(include_str!("../tests/data/synth20.libsvm").as_bytes()).unwrap();
        LogRegProblem::new(data).unwrap()
    }

    #[test]
    fn problem_constants() {
        let p = fixture_problem();
        assert_eq!(p.lambda, 1.0 / 20.0);
        assert_eq!(p.mu, p.lambda);
        assert_eq!(p.l, p.data.max_row_norm_sq() / 4.0 + p.lambda);
        assert_eq!(estimate_smoothness(&p), p.l);
    }

    #[test]
    fn smoothness_single_row_example() {
        let d = parse_str("+1 1:2\n").unwrap();
        let p = LogRegProblem::new(d).unwrap();
        // ‖x‖²/4 + λ = 1 + 1 = 2 for n = 1
        assert_eq!(p.l, 2.0);
    }

    #[test]
    fn gradient_at_zero_is_half_negative_label_row() {
        let p = fixture_problem();
        let w = vec![0.0; p.dim()];
        for i in 0..p.data.len() {
            let g = p.gradient(&w, i);
            let mut expected = vec![0.0; p.dim()];
            for &(j, v) in &p.data.rows[i] {
                expected[j as usize] = -p.data.labels[i] * 0.5 * v;
            }
            for (a, b) in g.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gradient_passes_central_differences() {
        let p = fixture_problem();
        let mut rng = RunRng::seed_from_u64(8);
        for _ in 0..20 {
            let w: Vec<f64> = (0..p.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let dir: Vec<f64> = (0..p.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let i = rng.gen_range(0..p.data.len());
            let g = p.gradient(&w, i);
            let analytic: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
            let h = 1e-6;
            let shift = |sign: f64| {
                let ws: Vec<f64> = w
                    .iter()
                    .zip(&dir)
                    .map(|(wi, di)| wi + sign * h * di)
                    .collect();
                p.component_objective(&ws, i)
            };
            let numeric = (shift(1.0) - shift(-1.0)) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic - numeric).abs() / scale < 1e-6,
                "i={i}: {analytic} vs {numeric}"
            );
        }
    }

    #[test]
    fn mean_component_gradient_is_full_gradient() {
        let p = fixture_problem();
        let mut rng = RunRng::seed_from_u64(21);
        let w: Vec<f64> = (0..p.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let full = p.full_gradient(&w);
        let mut mean = vec![0.0; p.dim()];
        for i in 0..p.data.len() {
            for (m, g) in mean.iter_mut().zip(p.gradient(&w, i)) {
                *m += g / p.data.len() as f64;
            }
        }
        for (a, b) in mean.iter().zip(&full) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn reference_solver_reaches_tolerance() {
        let d = parse_str("+1 1:1 2:0.5\n-1 1:-1 2:0.25\n+1 2:1\n-1 1:0.5 2:-1\n").unwrap();
        let p = LogRegProblem::new(d).unwrap();
        let sol = p.solve_reference(1e-16);
        assert!(sol.converged);
        assert!(sol.grad_norm_sq <= 1e-16);
        // optimality: f* ≤ F(0)
        assert!(sol.f <= p.objective(&vec![0.0; p.dim()]));
    }

    #[test]
    fn heavy_regularization_shrinks_reference_to_zero() {
        let d = parse_str("+1 1:1\n-1 1:-1\n").unwrap();
        let mut p = LogRegProblem::new(d).unwrap();
        p.lambda = 1e6;
        p.mu = p.lambda;
        p.l = p.data.max_row_norm_sq() / 4.0 + p.lambda;
        let sol = p.solve_reference(1e-20);
        assert!(sol.w.iter().all(|&x| x.abs() < 1e-5), "{:?}", sol.w);
    }

    #[test]
    fn sampled_hessian_spectral_bound() {
        // each fᵢ Hessian is σ'(z)·xᵢxᵢᵀ + λI, largest eigenvalue
        // σ'(z)‖xᵢ‖² + λ ≤ L
        let p = fixture_problem();
        let mut rng = RunRng::seed_from_u64(3);
        for _ in 0..1000 {
            let w: Vec<f64> = (0..p.dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let i = rng.gen_range(0..p.data.len());
            let z = p.margin(&w, i);
            let sig = sigmoid_neg(z);
            let sig_prime = sig * (1.0 - sig);
            let row_norm_sq: f64 = p.data.rows[i].iter().map(|&(_, v)| v * v).sum();
            let top_eig = sig_prime * row_norm_sq + p.lambda;
            assert!(top_eig <= p.l * (1.0 + 1e-12));
        }
    }

    #[test]
    fn stochastic_gradient_is_unbiased() {
        let p = fixture_problem();
        let oracle = LogRegOracle::new(&p);
        let mut rng = RunRng::seed_from_u64(99);
        let w: Vec<f64> = (0..p.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let full = p.full_gradient(&w);
        let draws = 100_000;
        let mut mean = vec![0.0; p.dim()];
        let mut m2 = vec![0.0; p.dim()];
        let mut g = vec![0.0; p.dim()];
        for _ in 0..draws {
            oracle.stochastic_gradient(&w, &mut rng, &mut g);
            for j in 0..g.len() {
                mean[j] += g[j];
                m2[j] += g[j] * g[j];
            }
        }
        for j in 0..mean.len() {
            let m = mean[j] / draws as f64;
            let var = (m2[j] / draws as f64 - m * m).max(0.0);
            let se = (var / draws as f64).sqrt();
            assert!(
                (m - full[j]).abs() <= 3.0 * se + 1e-12,
                "coord {j}: {m} vs {} (3se {})",
                full[j],
                3.0 * se
            );
        }
    }
}
