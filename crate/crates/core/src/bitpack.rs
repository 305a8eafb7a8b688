//! One-bit weight storage and the packed inference kernel.
//!
//! A sign matrix is stored as one bit per entry (bit set = positive), 64
//! columns per word, little-endian bit order within a word, plus the scale
//! 1/sqrt(d_in). The mat-vec uses the identity
//!     y_i = scale * (2 * sum_{j: bit(i,j)=1} x_j  -  sum_j x_j)
//! with the positive-subset sums evaluated through 256-entry byte tables of
//! partial sums, so the hot loop is one table lookup and add per 8 columns.

use crate::error::{CoreError, Result};
use crate::real::Real;
use crate::{Matrix, Vector};
use ndarray::ArrayView2;
use rayon::prelude::*;
use std::io::{Read, Write};
use std::time::Instant;

const RFB1_MAGIC: [u8; 4] = *b"RFB1";
const RFB1_VERSION: u32 = 1;

/// Sign bits of a weight matrix packed into 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedOneBit<T> {
    d_out: usize,
    d_in: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    scale: T,
}

impl<T: Real> PackedOneBit<T> {
    /// Packs the signs of a dense matrix; sign(0) counts as +1 so the bit is
    /// set exactly when the entry is >= 0. Padding bits beyond `d_in` stay 0.
    pub fn pack_signs(w: &ArrayView2<'_, T>) -> Result<Self> {
        let (d_out, d_in) = w.dim();
        if d_out == 0 || d_in == 0 {
            return Err(CoreError::ShapeMismatch(format!(
                "pack_signs: empty matrix {d_out}x{d_in}"
            )));
        }
        let words_per_row = d_in.div_ceil(64);
        let mut bits = vec![0u64; d_out * words_per_row];
        for (i, row) in w.rows().into_iter().enumerate() {
            let out = &mut bits[i * words_per_row..(i + 1) * words_per_row];
            for (j, &v) in row.iter().enumerate() {
                if v >= T::zero() {
                    out[j / 64] |= 1u64 << (j % 64);
                }
            }
        }
        Ok(PackedOneBit {
            d_out,
            d_in,
            words_per_row,
            bits,
            scale: T::one() / T::of(d_in as f64).sqrt(),
        })
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    /// Exact storage of the bit plane in bytes.
    pub fn packed_bytes(&self) -> usize {
        self.d_out * self.words_per_row * 8
    }

    pub fn bit(&self, i: usize, j: usize) -> bool {
        (self.bits[i * self.words_per_row + j / 64] >> (j % 64)) & 1 == 1
    }

    /// Dense matrix with entries sign(W)/sqrt(d_in).
    pub fn unpack(&self) -> Matrix<T> {
        Matrix::from_shape_fn((self.d_out, self.d_in), |(i, j)| {
            if self.bit(i, j) {
                self.scale
            } else {
                -self.scale
            }
        })
    }

    /// Byte-indexed partial-sum tables for one input vector, padded so the
    /// trailing partial byte reads zeros.
    fn build_tables(&self, x: &[T], tables: &mut Vec<T>) {
        let bytes_per_row = self.words_per_row * 8;
        tables.clear();
        tables.resize(bytes_per_row * 256, T::zero());
        let mut padded = vec![T::zero(); bytes_per_row * 8];
        padded[..x.len()].copy_from_slice(x);
        for b in 0..bytes_per_row {
            let base = &padded[b * 8..b * 8 + 8];
            let t = &mut tables[b * 256..(b + 1) * 256];
            for m in 1usize..256 {
                t[m] = t[m & (m - 1)] + base[m.trailing_zeros() as usize];
            }
        }
    }

    fn matvec_with_tables(&self, tables: &[T], total: T, out: &mut [T]) {
        let two = T::of(2.0);
        for (i, y) in out.iter_mut().enumerate() {
            let words = &self.bits[i * self.words_per_row..(i + 1) * self.words_per_row];
            let mut pos = T::zero();
            let mut byte_pos = 0usize;
            for &w in words {
                let t = &tables[byte_pos * 256..];
                pos += t[(w & 0xff) as usize];
                pos += t[256 + ((w >> 8) & 0xff) as usize];
                pos += t[2 * 256 + ((w >> 16) & 0xff) as usize];
                pos += t[3 * 256 + ((w >> 24) & 0xff) as usize];
                pos += t[4 * 256 + ((w >> 32) & 0xff) as usize];
                pos += t[5 * 256 + ((w >> 40) & 0xff) as usize];
                pos += t[6 * 256 + ((w >> 48) & 0xff) as usize];
                pos += t[7 * 256 + ((w >> 56) & 0xff) as usize];
                byte_pos += 8;
            }
            *y = self.scale * (two * pos - total);
        }
    }

    /// y = (sign(W)/sqrt(d_in)) x.
    pub fn matvec(&self, x: &Vector<T>) -> Vector<T> {
        assert_eq!(x.len(), self.d_in, "packed matvec input length");
        let xs = x.as_slice().map(|s| s.to_vec()).unwrap_or_else(|| x.to_vec());
        let total: T = xs.iter().copied().sum();
        let mut tables = Vec::new();
        self.build_tables(&xs, &mut tables);
        let mut out = vec![T::zero(); self.d_out];
        self.matvec_with_tables(&tables, total, &mut out);
        Vector::from(out)
    }

    /// Checked variant used by callers that surface errors.
    pub fn try_matvec(&self, x: &Vector<T>) -> Result<Vector<T>> {
        if x.len() != self.d_in {
            return Err(CoreError::DimMismatch {
                expected: self.d_in,
                got: x.len(),
                context: "packed matvec input length",
            });
        }
        Ok(self.matvec(x))
    }

    /// z = (sign(W)/sqrt(d_in))^T v.
    pub fn matvec_transpose(&self, v: &Vector<T>) -> Vector<T> {
        assert_eq!(v.len(), self.d_out, "packed transpose input length");
        let total: T = v.iter().copied().sum();
        let mut pos = vec![T::zero(); self.d_in];
        for i in 0..self.d_out {
            let vi = v[i];
            if vi == T::zero() {
                continue;
            }
            let words = &self.bits[i * self.words_per_row..(i + 1) * self.words_per_row];
            for (wi, &w) in words.iter().enumerate() {
                let mut m = w;
                while m != 0 {
                    let b = m.trailing_zeros() as usize;
                    pos[wi * 64 + b] += vi;
                    m &= m - 1;
                }
            }
        }
        let two = T::of(2.0);
        Vector::from_shape_fn(self.d_in, |j| self.scale * (two * pos[j] - total))
    }

    /// Row-wise mat-vec over a batch: X (n x d_in) -> n x d_out. Rows run in
    /// parallel, each with its own table buffer; per-row reductions are
    /// sequential so results do not depend on the schedule.
    pub fn matmul(&self, x: &Matrix<T>) -> Matrix<T> {
        assert_eq!(x.ncols(), self.d_in, "packed matmul input width");
        let n = x.nrows();
        let mut out = Matrix::<T>::zeros((n, self.d_out));
        let rows: Vec<(usize, Vec<T>)> = x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| (i, r.to_vec()))
            .collect();
        let results: Vec<(usize, Vec<T>)> = rows
            .into_par_iter()
            .map_init(Vec::new, |tables, (i, row)| {
                let total: T = row.iter().copied().sum();
                self.build_tables(&row, tables);
                let mut y = vec![T::zero(); self.d_out];
                self.matvec_with_tables(tables, total, &mut y);
                (i, y)
            })
            .collect();
        for (i, y) in results {
            out.row_mut(i).assign(&Vector::from(y));
        }
        out
    }

    pub fn try_matmul(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.ncols() != self.d_in {
            return Err(CoreError::DimMismatch {
                expected: self.d_in,
                got: x.ncols(),
                context: "packed matmul input width",
            });
        }
        Ok(self.matmul(x))
    }

    /// Binary dump: magic "RFB1", version, d_out, d_in (u32 LE), then rows
    /// of words LE. Bit-exact round trip.
    pub fn write_rfb1<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&RFB1_MAGIC)?;
        w.write_all(&RFB1_VERSION.to_le_bytes())?;
        w.write_all(&(self.d_out as u32).to_le_bytes())?;
        w.write_all(&(self.d_in as u32).to_le_bytes())?;
        for &word in &self.bits {
            w.write_all(&word.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_rfb1<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 16];
        r.read_exact(&mut head).map_err(|_| CoreError::Truncated {
            expected: 16,
            got: 0,
        })?;
        if head[0..4] != RFB1_MAGIC {
            return Err(CoreError::BadMagic(u32::from_be_bytes(
                head[0..4].try_into().unwrap(),
            )));
        }
        let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
        if version != RFB1_VERSION {
            return Err(CoreError::ParseError {
                line: 0,
                msg: format!("unsupported RFB1 version {version}"),
            });
        }
        let d_out = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let d_in = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
        if d_out == 0 || d_in == 0 {
            return Err(CoreError::ZeroDim(0));
        }
        let words_per_row = d_in.div_ceil(64);
        let n_words = d_out * words_per_row;
        let mut bits = vec![0u64; n_words];
        let mut buf = [0u8; 8];
        for (k, word) in bits.iter_mut().enumerate() {
            r.read_exact(&mut buf).map_err(|_| CoreError::Truncated {
                expected: 16 + 8 * n_words,
                got: 16 + 8 * k,
            })?;
            *word = u64::from_le_bytes(buf);
        }
        Ok(PackedOneBit {
            d_out,
            d_in,
            words_per_row,
            bits,
            scale: T::one() / T::of(d_in as f64).sqrt(),
        })
    }
}

/// Timing and footprint report for the packed kernel against a dense
/// 64-bit baseline on the same input.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub d_in: usize,
    pub d_out: usize,
    pub reps: usize,
    pub dense_ns: f64,
    pub packed_ns: f64,
    pub speedup: f64,
    pub dense_bytes: usize,
    pub packed_bytes: usize,
}

impl BenchReport {
    /// Memory ratio against the 64-bit dense baseline.
    pub fn memory_ratio(&self) -> f64 {
        self.dense_bytes as f64 / self.packed_bytes as f64
    }
}

fn dense_matvec(w: &Matrix<f64>, x: &Vector<f64>, out: &mut Vector<f64>) {
    for (y, row) in out.iter_mut().zip(w.rows()) {
        *y = row.dot(x);
    }
}

/// Times mean wall-clock per call of the dense and packed mat-vec on a
/// shared random input. Memory fields come from the formulas, not from
/// measurement.
pub fn bench_kernel(d_in: usize, d_out: usize, reps: usize, warmup: usize) -> Result<BenchReport> {
    if reps == 0 {
        return Err(CoreError::Config("bench reps must be >= 1".into()));
    }
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xbe9c);
    let w = Matrix::<f64>::from_shape_fn((d_out, d_in), |_| {
        <f64 as Real>::standard_normal(&mut rng) / (d_in as f64).sqrt()
    });
    let packed = PackedOneBit::pack_signs(&w.view())?;
    let x = Vector::<f64>::from_shape_fn(d_in, |_| <f64 as Real>::standard_normal(&mut rng));

    let mut out = Vector::<f64>::zeros(d_out);
    let mut sink = 0.0f64;
    for _ in 0..warmup {
        dense_matvec(&w, &x, &mut out);
        sink += out[0];
        sink += packed.matvec(&x)[0];
    }

    let t0 = Instant::now();
    for _ in 0..reps {
        dense_matvec(&w, &x, &mut out);
        sink += out[d_out - 1];
    }
    let dense_ns = t0.elapsed().as_nanos() as f64 / reps as f64;

    let xs = x.to_vec();
    let total: f64 = xs.iter().sum();
    let mut tables = Vec::new();
    let mut pout = vec![0.0f64; d_out];
    let t1 = Instant::now();
    for _ in 0..reps {
        packed.build_tables(&xs, &mut tables);
        packed.matvec_with_tables(&tables, total, &mut pout);
        sink += pout[d_out - 1];
    }
    let packed_ns = t1.elapsed().as_nanos() as f64 / reps as f64;
    std::hint::black_box(sink);

    Ok(BenchReport {
        d_in,
        d_out,
        reps,
        dense_ns,
        packed_ns,
        speedup: dense_ns / packed_ns,
        dense_bytes: d_out * d_in * 8,
        packed_bytes: packed.packed_bytes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;

    fn random_matrix(d_out: usize, d_in: usize, seed: u64) -> Matrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_shape_fn((d_out, d_in), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn pack_signs_two_by_two() {
        let w: Matrix<f64> = array![[0.5, -0.3], [-0.1, 0.9]];
        let p = PackedOneBit::pack_signs(&w.view()).unwrap();
        assert_eq!(p.bits, vec![0b01, 0b10]); // bit0 = column 0
        assert!((p.scale - 0.7071067811865475).abs() < 1e-16);
        assert_eq!(p.packed_bytes(), 2 * 8);
    }

    #[test]
    fn all_positive_sets_every_data_bit() {
        let w = Matrix::<f64>::from_elem((3, 70), 0.25);
        let p = PackedOneBit::pack_signs(&w.view()).unwrap();
        for i in 0..3 {
            for j in 0..70 {
                assert!(p.bit(i, j));
            }
            // padding clear
            for j in 70..128 {
                assert!((p.bits[i * p.words_per_row + j / 64] >> (j % 64)) & 1 == 0);
            }
        }
    }

    #[test]
    fn unpack_is_sign_over_sqrt_d() {
        let w = random_matrix(100, 130, 5);
        let p = PackedOneBit::pack_signs(&w.view()).unwrap();
        let u = p.unpack();
        let s = 1.0 / (130f64).sqrt();
        for (a, b) in u.iter().zip(w.iter()) {
            let expect = if *b >= 0.0 { s } else { -s };
            assert_eq!(*a, expect);
        }
    }

    #[test]
    fn pack_unpack_idempotent() {
        let w = random_matrix(17, 100, 9);
        let p = PackedOneBit::pack_signs(&w.view()).unwrap();
        let p2 = PackedOneBit::pack_signs(&p.unpack().view()).unwrap();
        assert_eq!(p, p2);
    }

    #[test]
    fn matvec_hand_case() {
        let w: Matrix<f64> = array![[0.5, -0.3], [-0.1, 0.9]];
        let p = PackedOneBit::pack_signs(&w.view()).unwrap();
        let y = p.matvec(&array![2.0, 1.0]);
        let s = 1.0 / 2f64.sqrt();
        assert!((y[0] - s).abs() < 1e-14); // (2-1)/sqrt(2)
        assert!((y[1] + s).abs() < 1e-14); // (-2+1)/sqrt(2)
    }

    #[test]
    fn matvec_zero_input() {
        let p = PackedOneBit::pack_signs(&random_matrix(5, 77, 3).view()).unwrap();
        let y = p.matvec(&Vector::zeros(77));
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matvec_matches_dense_across_shapes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for &d_in in &[8usize, 64, 65, 127, 128, 1000] {
            for rep in 0..3 {
                let d_out = [8, 33, 120][rep % 3];
                let w = random_matrix(d_out, d_in, d_in as u64 * 31 + rep as u64);
                let p = PackedOneBit::pack_signs(&w.view()).unwrap();
                let dense = p.unpack();
                let x = Vector::from_shape_fn(d_in, |_| rng.gen_range(-2.0..2.0));
                let y = p.matvec(&x);
                let yd = dense.dot(&x);
                let tol = 1e-10 * d_in as f64;
                for (a, b) in y.iter().zip(yd.iter()) {
                    assert!((a - b).abs() <= tol, "d_in={d_in} diff {}", (a - b).abs());
                }
            }
        }
    }

    #[test]
    fn matvec_transpose_matches_dense() {
        let w = random_matrix(40, 130, 13);
        let p = PackedOneBit::pack_signs(&w.view()).unwrap();
        let dense = p.unpack();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let v = Vector::from_shape_fn(40, |_| rng.gen_range(-1.0..1.0));
        let z = p.matvec_transpose(&v);
        let zd = dense.t().dot(&v);
        for (a, b) in z.iter().zip(zd.iter()) {
            assert!((a - b).abs() <= 1e-10 * 130.0);
        }
    }

    #[test]
    fn matmul_equals_rowwise_matvec() {
        let p = PackedOneBit::pack_signs(&random_matrix(19, 90, 2).view()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let x = Matrix::from_shape_fn((7, 90), |_| rng.gen_range(-1.0..1.0));
        let batch = p.matmul(&x);
        for (i, row) in x.rows().into_iter().enumerate() {
            let single = p.matvec(&row.to_owned());
            for (a, b) in batch.row(i).iter().zip(single.iter()) {
                assert_eq!(*a, *b); // same reduction order, exact
            }
        }
    }

    #[test]
    fn identity_input_reads_rows_of_sign_transpose() {
        let w = random_matrix(6, 6, 8);
        let p = PackedOneBit::pack_signs(&w.view()).unwrap();
        let y = p.matmul(&Matrix::eye(6));
        let expect = p.unpack().t().to_owned();
        for (a, b) in y.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn linearity_within_tolerance() {
        let p = PackedOneBit::pack_signs(&random_matrix(25, 200, 4).view()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let x = Vector::from_shape_fn(200, |_| rng.gen_range(-1.0..1.0));
        let z = Vector::from_shape_fn(200, |_| rng.gen_range(-1.0..1.0));
        let (a, b) = (0.7, -1.3);
        let lhs = p.matvec(&(&x * a + &z * b));
        let rhs = p.matvec(&x) * a + p.matvec(&z) * b;
        for (u, v) in lhs.iter().zip(rhs.iter()) {
            assert!((u - v).abs() <= 1e-10 * 200.0);
        }
    }

    #[test]
    fn memory_law() {
        for &(d_out, d_in) in &[(64usize, 64usize), (10, 65), (3, 1000), (128, 4096)] {
            let p = PackedOneBit::pack_signs(&Matrix::<f64>::from_elem((d_out, d_in), 1.0).view())
                .unwrap();
            assert_eq!(p.packed_bytes(), d_out * d_in.div_ceil(64) * 8);
        }
    }

    #[test]
    fn rfb1_round_trip_bit_exact() {
        let p = PackedOneBit::pack_signs(&random_matrix(23, 157, 12).view()).unwrap();
        let mut buf = Vec::new();
        p.write_rfb1(&mut buf).unwrap();
        assert_eq!(&buf[0..4], b"RFB1");
        let q = PackedOneBit::<f64>::read_rfb1(buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rfb1_rejects_bad_magic_and_truncation() {
        let p = PackedOneBit::pack_signs(&random_matrix(4, 64, 1).view()).unwrap();
        let mut buf = Vec::new();
        p.write_rfb1(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            PackedOneBit::<f64>::read_rfb1(bad.as_slice()),
            Err(CoreError::BadMagic(_))
        ));
        let short = &buf[..buf.len() - 3];
        assert!(matches!(
            PackedOneBit::<f64>::read_rfb1(short),
            Err(CoreError::Truncated { .. })
        ));
    }

    #[test]
    fn bench_report_formulas() {
        let r = bench_kernel(64, 64, 3, 1).unwrap();
        assert_eq!(r.packed_bytes, 64 * 8);
        assert_eq!(r.dense_bytes, 64 * 64 * 8);
        let r2 = bench_kernel(4096, 16, 1, 0).unwrap();
        assert_eq!(r2.dense_bytes / r2.packed_bytes, 64);
    }
}
