use crate::scalar::Scalar;

/// Dense batch of jets.
///
/// Storage is `[row][channel][col]`. Channel 0 holds values; channels
/// `1..=d` hold first derivatives with respect to each of the `d` seeded
/// input coordinates and channels `d+1..=2d` the matching pure second
/// derivatives. A tensor with a single channel is "plain" (no jets).
#[derive(Clone, Debug, PartialEq)]
pub struct JetTensor<T> {
    rows: usize,
    cols: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> JetTensor<T> {
    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Self {
        assert!(channels % 2 == 1, "channel count must be 1 + 2d");
        Self {
            rows,
            cols,
            channels,
            data: vec![T::zero(); rows * cols * channels],
        }
    }

    /// Plain (value-only) tensor from row-major `rows × cols` data.
    pub fn plain(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "plain tensor size mismatch");
        Self {
            rows,
            cols,
            channels: 1,
            data,
        }
    }

    pub fn from_parts(rows: usize, cols: usize, channels: usize, data: Vec<T>) -> Self {
        assert!(channels % 2 == 1, "channel count must be 1 + 2d");
        assert_eq!(
            data.len(),
            rows * cols * channels,
            "jet tensor size mismatch"
        );
        Self {
            rows,
            cols,
            channels,
            data,
        }
    }

    /// Input coordinates seeded as independent variables.
    ///
    /// `coords` is row-major `rows × d`; column `i` gets unit first
    /// derivative along coordinate `i`.
    pub fn seeded(rows: usize, d: usize, coords: &[T]) -> Self {
        assert_eq!(coords.len(), rows * d, "seeded input size mismatch");
        let mut t = Self::zeros(rows, d, 1 + 2 * d);
        for r in 0..rows {
            t.channel_mut(r, 0)
                .copy_from_slice(&coords[r * d..(r + 1) * d]);
            for i in 0..d {
                t.channel_mut(r, 1 + i)[i] = T::one();
            }
        }
        t
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of seeded coordinates `d`.
    #[inline]
    pub fn jet_dim(&self) -> usize {
        (self.channels - 1) / 2
    }

    #[inline]
    pub fn is_plain(&self) -> bool {
        self.channels == 1
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        let w = self.cols * self.channels;
        &self.data[r * w..(r + 1) * w]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        let w = self.cols * self.channels;
        &mut self.data[r * w..(r + 1) * w]
    }

    #[inline]
    pub fn channel(&self, r: usize, c: usize) -> &[T] {
        let start = (r * self.channels + c) * self.cols;
        &self.data[start..start + self.cols]
    }

    #[inline]
    pub fn channel_mut(&mut self, r: usize, c: usize) -> &mut [T] {
        let start = (r * self.channels + c) * self.cols;
        &mut self.data[start..start + self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize, col: usize) -> T {
        self.data[(r * self.channels + c) * self.cols + col]
    }

    /// Value at `(row, col)`.
    #[inline]
    pub fn value(&self, r: usize, col: usize) -> T {
        self.get(r, 0, col)
    }

    /// Value channel as a row-major `rows × cols` vector.
    pub fn values(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            out.extend_from_slice(self.channel(r, 0));
        }
        out
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.channels == other.channels
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
