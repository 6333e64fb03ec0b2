//! Segmentation lattice shared by every trainer and tokenizer.
//!
//! A lattice caches one score per span of the input (evaluated exactly once)
//! and runs Viterbi or forward–backward over it. Scores arrive as
//! probabilities; all accumulation happens in the log domain, so strings of
//! thousands of characters with per-token probabilities down to 1e-300 stay
//! finite.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    /// No combination of scorable tokens covers this character.
    #[error("no scorable token covers character {ch:?} at position {pos}")]
    UnscorableChar { ch: char, pos: usize },
}

/// Segmentation lattice over `text` for pieces of up to `max_piece_len`
/// characters.
pub struct Lattice<'a> {
    text: &'a str,
    /// Byte offset of every char boundary; `bounds[0] == 0`,
    /// `bounds[n] == text.len()`.
    bounds: Vec<usize>,
    /// Log score per span, indexed by `start * max_piece_len + (len - 1)`;
    /// `NEG_INFINITY` marks an unusable span.
    log_scores: Vec<f64>,
    max_piece_len: usize,
}

/// Forward/backward marginals of a lattice, in the log domain.
///
/// `log_alpha[i]` sums all segmentations of the prefix ending at char `i`;
/// `log_beta[j]` sums all segmentations of the suffix starting at char `j`.
pub struct Marginals {
    pub log_alpha: Vec<f64>,
    pub log_beta: Vec<f64>,
}

impl Marginals {
    pub fn alpha(&self, i: usize) -> f64 {
        self.log_alpha[i].exp()
    }

    pub fn beta(&self, j: usize) -> f64 {
        self.log_beta[j].exp()
    }

    /// Log of the total marginal probability of the whole string.
    pub fn log_total(&self) -> f64 {
        *self.log_alpha.last().expect("marginals are never empty")
    }
}

impl<'a> Lattice<'a> {
    /// Build the lattice, evaluating `score` once per span.
    pub fn new<F>(text: &'a str, mut score: F, max_piece_len: usize) -> Self
    where
        F: FnMut(&str) -> f64,
    {
        assert!(max_piece_len > 0, "max_piece_len must be positive");
        let mut bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).collect();
        bounds.push(text.len());
        let n = bounds.len() - 1;
        let mut log_scores = vec![f64::NEG_INFINITY; n * max_piece_len];
        for start in 0..n {
            for len in 1..=max_piece_len.min(n - start) {
                let piece = &text[bounds[start]..bounds[start + len]];
                let p = score(piece);
                if p > 0.0 {
                    log_scores[start * max_piece_len + (len - 1)] = p.ln();
                }
            }
        }
        Lattice {
            text,
            bounds,
            log_scores,
            max_piece_len,
        }
    }

    /// Number of characters in the underlying text.
    pub fn num_chars(&self) -> usize {
        self.bounds.len() - 1
    }

    /// The span covering chars `start..end`.
    pub fn piece(&self, start: usize, end: usize) -> &'a str {
        &self.text[self.bounds[start]..self.bounds[end]]
    }

    /// Cached log score of the span covering chars `start..end`
    /// (`NEG_INFINITY` if unusable).
    pub fn log_score(&self, start: usize, end: usize) -> f64 {
        debug_assert!(end > start && end - start <= self.max_piece_len);
        self.log_scores[start * self.max_piece_len + (end - start - 1)]
    }

    pub fn max_piece_len(&self) -> usize {
        self.max_piece_len
    }

    fn unscorable(&self, first_dead: usize) -> LatticeError {
        // The char ending at the first unreachable boundary is the culprit.
        let pos = first_dead - 1;
        let ch = self.text[self.bounds[pos]..].chars().next().expect("in range");
        LatticeError::UnscorableChar { ch, pos }
    }

    /// Highest-log-score segmentation. On ties the longer incoming token
    /// wins.
    pub fn viterbi(&self) -> Result<Vec<&'a str>, LatticeError> {
        let n = self.num_chars();
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut best = vec![f64::NEG_INFINITY; n + 1];
        let mut back = vec![0usize; n + 1];
        best[0] = 0.0;
        for end in 1..=n {
            // Scan the longest candidate first so equal scores keep it.
            for start in end.saturating_sub(self.max_piece_len)..end {
                if best[start] == f64::NEG_INFINITY {
                    continue;
                }
                let ls = self.log_score(start, end);
                if ls == f64::NEG_INFINITY {
                    continue;
                }
                let cand = best[start] + ls;
                if cand > best[end] {
                    best[end] = cand;
                    back[end] = start;
                }
            }
        }
        if best[n] == f64::NEG_INFINITY {
            let first_dead = (1..=n)
                .find(|&i| best[i] == f64::NEG_INFINITY)
                .expect("final position is dead");
            return Err(self.unscorable(first_dead));
        }
        let mut tokens = Vec::new();
        let mut end = n;
        while end > 0 {
            let start = back[end];
            tokens.push(self.piece(start, end));
            end = start;
        }
        tokens.reverse();
        Ok(tokens)
    }

    /// Log score of the best segmentation (same path `viterbi` returns).
    pub fn viterbi_log_score(&self) -> Result<f64, LatticeError> {
        let tokens = self.viterbi()?;
        let mut pos = 0usize;
        let mut sum = 0.0;
        for t in &tokens {
            let len = t.chars().count();
            sum += self.log_score(pos, pos + len);
            pos += len;
        }
        Ok(sum)
    }

    /// Forward and backward sums over all segmentations.
    #[allow(clippy::needless_range_loop)] // index loops mirror the DP recurrences
    pub fn forward_backward(&self) -> Result<Marginals, LatticeError> {
        let n = self.num_chars();
        let mut log_alpha = vec![f64::NEG_INFINITY; n + 1];
        let mut log_beta = vec![f64::NEG_INFINITY; n + 1];
        log_alpha[0] = 0.0;
        log_beta[n] = 0.0;
        let mut terms = Vec::with_capacity(self.max_piece_len);
        for end in 1..=n {
            terms.clear();
            for start in end.saturating_sub(self.max_piece_len)..end {
                let t = log_alpha[start] + self.log_score(start, end);
                if t != f64::NEG_INFINITY {
                    terms.push(t);
                }
            }
            log_alpha[end] = log_sum_exp(&terms);
        }
        if log_alpha[n] == f64::NEG_INFINITY {
            let first_dead = (1..=n)
                .find(|&i| log_alpha[i] == f64::NEG_INFINITY)
                .expect("final position is dead");
            return Err(self.unscorable(first_dead));
        }
        for start in (0..n).rev() {
            terms.clear();
            for end in start + 1..=(start + self.max_piece_len).min(n) {
                let t = self.log_score(start, end) + log_beta[end];
                if t != f64::NEG_INFINITY {
                    terms.push(t);
                }
            }
            log_beta[start] = log_sum_exp(&terms);
        }
        Ok(Marginals {
            log_alpha,
            log_beta,
        })
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|&t| (t - m).exp()).sum();
    m + sum.ln()
}

/// Convenience wrapper: best segmentation of `text` as owned strings.
pub fn viterbi<F>(text: &str, score: F, max_piece_len: usize) -> Result<Vec<String>, LatticeError>
where
    F: FnMut(&str) -> f64,
{
    let lattice = Lattice::new(text, score, max_piece_len);
    Ok(lattice.viterbi()?.into_iter().map(String::from).collect())
}

/// Convenience wrapper: forward/backward marginals of `text`.
pub fn forward_backward<F>(
    text: &str,
    score: F,
    max_piece_len: usize,
) -> Result<Marginals, LatticeError>
where
    F: FnMut(&str) -> f64,
{
    Lattice::new(text, score, max_piece_len).forward_backward()
}
