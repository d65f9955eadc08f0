//! Exact expansion of a real matrix over tensor products of Pauli operators,
//! and the truncated-expansion quality curve.
//!
//! A 2^n x 2^n matrix M decomposes uniquely as sum_i s_i sigma_i with
//! s_i = 2^-n tr(sigma_i^dag M). Matrices whose dimension is not a power of
//! two are zero-padded; padding preserves the Frobenius norm. Each word entry
//! sigma[j, k] is nonzero only when j XOR k matches the word's X/Y support,
//! so a sparse M with nnz entries costs nnz * 2^n instead of 4^n dense traces.
//!
//! Letter codes per qubit: I = 0, X = 1, Y = 2, Z = 3; qubit 0 is the most
//! significant bit of the row index.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use num_complex::Complex64;
use std::io::Write;

/// Coefficients smaller than this are structural zeros, dropped and not counted.
pub const DROP_THRESHOLD: f64 = 1e-14;

/// Largest supported word length; the expansion has 4^n coefficients.
pub const MAX_QUBITS: usize = 12;

/// One term of a tensor-Pauli expansion.
#[derive(Debug, Clone)]
pub struct PauliTerm {
    /// Length-n word over {I, X, Y, Z}.
    pub word: String,
    pub coefficient: Complex64,
    pub magnitude: f64,
}

/// Full expansion plus the normalized Frobenius distance after each prefix.
#[derive(Debug, Clone)]
pub struct ExpansionReport {
    pub n_qubits: usize,
    /// Terms sorted by descending magnitude, ties by lexicographic word.
    pub terms: Vec<PauliTerm>,
    /// d(n) for n = 0 ..= terms.len(); d(0) = 1.
    pub distances: Vec<f64>,
    /// Frobenius norm of the padded matrix.
    pub frobenius: f64,
}

fn padded_qubits(m: &SparseMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(format!(
            "Pauli expansion needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    let mut n = 0;
    while (1usize << n) < m.nrows() {
        n += 1;
    }
    if n > MAX_QUBITS {
        return Err(Error::ResourceCap {
            what: format!("Pauli expansion of a {}-row matrix", m.nrows()),
            needed: n as u64,
            cap: MAX_QUBITS as u64,
        });
    }
    Ok(n)
}

/// Accumulates the 4^n coefficient table. Entry (j, k) of M contributes to the
/// 2^n words whose per-qubit letters match the diagonal/off-diagonal pattern
/// of (j, k).
fn coefficient_table(m: &SparseMatrix, n: usize) -> Vec<Complex64> {
    let dim_words = 1usize << (2 * n);
    let mut coeff = vec![Complex64::new(0.0, 0.0); dim_words];
    let scale = 1.0 / (1u64 << n) as f64;
    // i^(-t) for t in 0..4
    let inv_phase = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    for j in 0..m.nrows() {
        for &(k, v) in m.row(j) {
            let diff = j ^ k;
            for mask in 0..(1usize << n) {
                let mut id = 0usize;
                let mut t = 0usize;
                for l in 0..n {
                    let bit = n - 1 - l;
                    let d = (diff >> bit) & 1;
                    let sel = (mask >> bit) & 1;
                    let code = if d == 0 {
                        if sel == 1 {
                            t += 2 * ((j >> bit) & 1); // Z
                            3
                        } else {
                            0 // I
                        }
                    } else if sel == 1 {
                        t += 1 + 2 * ((k >> bit) & 1); // Y
                        2
                    } else {
                        1 // X
                    };
                    id = (id << 2) | code;
                }
                coeff[id] += v * scale * inv_phase[t % 4];
            }
        }
    }
    coeff
}

fn word_string(id: usize, n: usize) -> String {
    const LETTERS: [char; 4] = ['I', 'X', 'Y', 'Z'];
    (0..n)
        .map(|l| LETTERS[(id >> (2 * (n - 1 - l))) & 3])
        .collect()
}

/// Expands M (zero-padded to the next power of two) over tensor-Pauli words.
/// Terms are sorted by descending |s_i| with lexicographic tie-breaking;
/// coefficients below [`DROP_THRESHOLD`] are dropped.
pub fn pauli_expand(m: &SparseMatrix) -> Result<Vec<PauliTerm>> {
    let n = padded_qubits(m)?;
    let coeff = coefficient_table(m, n);
    let mut terms: Vec<PauliTerm> = coeff
        .iter()
        .enumerate()
        .filter_map(|(id, &c)| {
            let magnitude = c.norm();
            (magnitude >= DROP_THRESHOLD).then(|| PauliTerm {
                word: word_string(id, n),
                coefficient: c,
                magnitude,
            })
        })
        .collect();
    terms.sort_by(|a, b| {
        b.magnitude
            .total_cmp(&a.magnitude)
            .then_with(|| a.word.cmp(&b.word))
    });
    Ok(terms)
}

/// Dense entries of `s * sigma_word` accumulated into `res` with a minus sign.
/// Returns the change of the squared Frobenius norm of `res`.
fn subtract_term(res: &mut [f64], n: usize, word_id: usize, s: Complex64) -> f64 {
    let dim = 1usize << n;
    // X/Y support determines k = j ^ xmask. The code at shift 2m belongs to
    // the qubit whose row bit is m, so shifts and bits line up directly.
    let mut xmask = 0usize;
    for l in 0..n {
        let code = (word_id >> (2 * l)) & 3;
        if code == 1 || code == 2 {
            xmask |= 1 << l;
        }
    }
    let mut delta = 0.0;
    let phase = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ];
    for j in 0..dim {
        let k = j ^ xmask;
        let mut t = 0usize;
        for l in 0..n {
            let code = (word_id >> (2 * l)) & 3;
            let bit = l;
            match code {
                3 => t += 2 * ((j >> bit) & 1),
                2 => t += 1 + 2 * ((k >> bit) & 1),
                _ => {}
            }
        }
        let entry = (s * phase[t % 4]).re;
        let cell = &mut res[j * dim + k];
        let old = *cell;
        *cell = old - entry;
        delta += (*cell) * (*cell) - old * old;
    }
    delta
}

/// Builds the expansion and the normalized Frobenius distance sequence
/// d(n) = ||M - Sigma_n||_F / ||M||_F, where Sigma_n keeps the n largest
/// terms. Distances are computed by subtracting each term from a dense
/// residual copy of the padded matrix.
pub fn truncation_curve(m: &SparseMatrix) -> Result<ExpansionReport> {
    let n = padded_qubits(m)?;
    let dim = 1usize << n;
    let terms = pauli_expand(m)?;

    let mut res = vec![0.0f64; dim * dim];
    for j in 0..m.nrows() {
        for &(k, v) in m.row(j) {
            res[j * dim + k] = v;
        }
    }
    let norm2: f64 = res.iter().map(|v| v * v).sum();
    if norm2 == 0.0 {
        return Err(Error::invalid(
            "zero matrix: normalized distance is undefined",
        ));
    }
    let norm = norm2.sqrt();

    let mut distances = Vec::with_capacity(terms.len() + 1);
    distances.push(1.0);
    let mut r2 = norm2;
    let mut compensation = 0.0f64; // Kahan carry for the running norm
    for term in &terms {
        let id = word_id_of(&term.word);
        let delta = subtract_term(&mut res, n, id, term.coefficient);
        let yk = delta - compensation;
        let tk = r2 + yk;
        compensation = (tk - r2) - yk;
        r2 = tk;
        // Orthogonality of distinct Pauli words makes the true sequence
        // non-increasing; the min guards the floating-point drift only.
        let d = (r2.max(0.0)).sqrt() / norm;
        distances.push(d.min(*distances.last().unwrap()));
    }
    // Exact final residual, free of accumulated drift.
    let final_r2: f64 = res.iter().map(|v| v * v).sum();
    *distances.last_mut().unwrap() = final_r2.sqrt() / norm;

    Ok(ExpansionReport {
        n_qubits: n,
        terms,
        distances,
        frobenius: norm,
    })
}

/// Inverse of [`word_string`] with the letter of qubit 0 first.
fn word_id_of(word: &str) -> usize {
    let n = word.len();
    word.chars().enumerate().fold(0usize, |acc, (l, ch)| {
        let code = match ch {
            'I' => 0,
            'X' => 1,
            'Y' => 2,
            'Z' => 3,
            _ => unreachable!("invalid Pauli letter"),
        };
        acc | code << (2 * (n - 1 - l))
    })
}

/// Dense reassembly sum_i s_i sigma_i of a term list (test oracle and export
/// verification; cost terms * 2^n).
pub fn reassemble(terms: &[PauliTerm], n: usize) -> Vec<f64> {
    let dim = 1usize << n;
    let mut out = vec![0.0f64; dim * dim];
    for term in terms {
        let id = word_id_of(&term.word);
        // subtract_term subtracts; add by negating the coefficient
        subtract_term(&mut out, n, id, -term.coefficient);
    }
    out
}

/// Writes `rank,word,re,im,magnitude,distance_after_rank`.
pub fn write_expansion_csv<W: Write>(report: &ExpansionReport, out: &mut W) -> Result<()> {
    writeln!(out, "rank,word,re,im,magnitude,distance_after_rank")?;
    for (i, term) in report.terms.iter().enumerate() {
        writeln!(
            out,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            i + 1,
            term.word,
            term.coefficient.re,
            term.coefficient.im,
            term.magnitude,
            report.distances[i + 1]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carleman::single_site_relaxation;
    use crate::lattice::{make_model, ModelKind};
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_is_single_term() {
        let m = SparseMatrix::identity(4);
        let terms = pauli_expand(&m).unwrap();
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].word, "II");
        assert_abs_diff_eq!(terms[0].coefficient.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(terms[0].coefficient.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn single_qubit_x_and_y() {
        let x = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let terms = pauli_expand(&x).unwrap();
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].word, "X");
        assert_abs_diff_eq!(terms[0].coefficient.re, 1.0, epsilon = 1e-15);

        // real antisymmetric [[0,-1],[1,0]] = -i Y
        let m = SparseMatrix::from_dense(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let terms = pauli_expand(&m).unwrap();
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].word, "Y");
        assert_abs_diff_eq!(terms[0].coefficient.im, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(terms[0].coefficient.re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_oversized_and_zero() {
        let z = SparseMatrix::zeros(4, 4);
        assert!(truncation_curve(&z).is_err());
        let big = SparseMatrix::identity(1 << 13);
        assert!(pauli_expand(&big).is_err());
    }

    #[test]
    fn reconstruction_is_exact_d1q3() {
        let model = make_model(ModelKind::D1Q3);
        let r1 = single_site_relaxation(&model, 1.0).unwrap(); // 12 -> 16
        let terms = pauli_expand(&r1).unwrap();
        let n = 4;
        let dense = reassemble(&terms, n);
        let dim = 1 << n;
        for j in 0..dim {
            for k in 0..dim {
                let expect = if j < 12 && k < 12 { r1.get(j, k) } else { 0.0 };
                assert_abs_diff_eq!(dense[j * dim + k], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn parseval_and_reality_d1q3() {
        let model = make_model(ModelKind::D1Q3);
        let r1 = single_site_relaxation(&model, 0.7).unwrap();
        let report = truncation_curve(&r1).unwrap();
        let n = report.n_qubits;
        let sum_sq: f64 = report.terms.iter().map(|t| t.magnitude.powi(2)).sum();
        let lhs = report.frobenius.powi(2);
        assert_abs_diff_eq!(lhs, (1u64 << n) as f64 * sum_sq, epsilon = 1e-12 * lhs);
        for term in &report.terms {
            let n_y = term.word.chars().filter(|&c| c == 'Y').count();
            if n_y % 2 == 0 {
                assert!(term.coefficient.im.abs() < 1e-12, "word {}", term.word);
            } else {
                assert!(term.coefficient.re.abs() < 1e-12, "word {}", term.word);
            }
        }
    }

    #[test]
    fn distance_curve_properties() {
        let model = make_model(ModelKind::D1Q3);
        let r1 = single_site_relaxation(&model, 1.0).unwrap();
        let report = truncation_curve(&r1).unwrap();
        assert_abs_diff_eq!(report.distances[0], 1.0);
        for w in report.distances.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert!(*report.distances.last().unwrap() <= 1e-12);
        // cross-check against the orthogonality identity
        let n = report.n_qubits as u32;
        let mut r2 = report.frobenius.powi(2);
        for (i, term) in report.terms.iter().enumerate() {
            r2 -= (1u64 << n) as f64 * term.magnitude.powi(2);
            let d = (r2.max(0.0)).sqrt() / report.frobenius;
            if d > 1e-6 {
                assert_abs_diff_eq!(report.distances[i + 1], d, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn expansion_is_bit_for_bit_reproducible() {
        let model = make_model(ModelKind::D1Q3);
        let r1 = single_site_relaxation(&model, 1.3).unwrap();
        let a = truncation_curve(&r1).unwrap();
        let b = truncation_curve(&r1).unwrap();
        assert_eq!(a.distances, b.distances);
        for (x, y) in a.terms.iter().zip(&b.terms) {
            assert_eq!(x.word, y.word);
            assert_eq!(x.coefficient, y.coefficient);
        }
    }

    #[test]
    fn csv_shape() {
        let m = SparseMatrix::identity(2);
        let report = truncation_curve(&m).unwrap();
        let mut buf = Vec::new();
        write_expansion_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "rank,word,re,im,magnitude,distance_after_rank");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("1,I,"));
    }
}
