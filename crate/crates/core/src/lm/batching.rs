use ndarray::Array2;

/// Contiguous-batch layout: the token stream is cut into `batch_size`
/// equal columns and consumed top to bottom in windows of `bptt` rows, the
/// target of each row being the next row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchLayout {
    pub batch_size: usize,
    pub rows: usize,
    pub bptt: usize,
}

impl BatchLayout {
    pub fn new(stream_len: usize, batch_size: usize, bptt: usize) -> Self {
        BatchLayout {
            batch_size,
            rows: stream_len / batch_size,
            bptt,
        }
    }

    pub fn batches_per_epoch(&self) -> usize {
        if self.rows < 2 {
            0
        } else {
            (self.rows - 1).div_ceil(self.bptt)
        }
    }

    /// Row range of inputs for batch `k`; targets are the same rows shifted by one.
    pub fn batch_rows(&self, k: usize) -> std::ops::Range<usize> {
        let start = k * self.bptt;
        start..(start + self.bptt).min(self.rows - 1)
    }

    /// Index (within an epoch) of the first batch that reads stream
    /// position `pos`; `None` for the trimmed tail.
    pub fn batch_of_position(&self, pos: usize) -> Option<usize> {
        let col = pos / self.rows.max(1);
        if self.rows < 2 || col >= self.batch_size {
            return None;
        }
        let row = pos % self.rows;
        Some(row.saturating_sub(1) / self.bptt)
    }

    /// Inputs and targets of batch `k`, each `seq_len × batch_size`.
    pub fn batch(&self, stream: &[usize], k: usize) -> Batch {
        let rows = self.batch_rows(k);
        let seq_len = rows.len();
        let mut inputs = Array2::zeros((seq_len, self.batch_size));
        let mut targets = Array2::zeros((seq_len, self.batch_size));
        for (t, r) in rows.enumerate() {
            for b in 0..self.batch_size {
                inputs[[t, b]] = stream[b * self.rows + r];
                targets[[t, b]] = stream[b * self.rows + r + 1];
            }
        }
        Batch { inputs, targets }
    }
}

/// Token ids laid out time-major (`seq_len × batch`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub inputs: Array2<usize>,
    pub targets: Array2<usize>,
}

impl Batch {
    pub fn seq_len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn batch_size(&self) -> usize {
        self.inputs.ncols()
    }
}
