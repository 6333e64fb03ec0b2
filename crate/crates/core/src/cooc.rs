//! Sparse target×source co-occurrence table and its probability views.
//!
//! The table is frozen after construction: counts live in per-target rows
//! sorted by source id, with row sums, column sums, and the grand total
//! cached at freeze time. Training never mutates a table in place — each
//! count or prune step builds a replacement through [`CoocBuilder`].

use std::collections::{HashMap, HashSet};

use crate::vocab::Vocab;

/// Distinguished source token standing for "aligned to nothing".
pub const NULL_TOKEN: &str = "<null>";

/// Log score granted to a single character the table cannot score, so that
/// decoding and training never fail on full coverage.
pub const CHAR_FLOOR_LOG: f64 = -30.0;

/// Floor probability for unscorable single characters.
pub fn char_floor() -> f64 {
    CHAR_FLOOR_LOG.exp()
}

fn is_single_char(piece: &str) -> bool {
    let mut it = piece.chars();
    it.next().is_some() && it.next().is_none()
}

/// Accumulator for building a [`CoocTable`] with fixed vocabularies.
pub struct CoocBuilder {
    tgt_vocab: Vocab,
    src_vocab: Vocab,
    cells: Vec<HashMap<u32, f64>>,
}

impl CoocBuilder {
    pub fn new(tgt_vocab: Vocab, src_vocab: Vocab) -> Self {
        let cells = (0..tgt_vocab.len()).map(|_| HashMap::new()).collect();
        CoocBuilder {
            tgt_vocab,
            src_vocab,
            cells,
        }
    }

    pub fn tgt_vocab(&self) -> &Vocab {
        &self.tgt_vocab
    }

    pub fn src_vocab(&self) -> &Vocab {
        &self.src_vocab
    }

    pub fn add(&mut self, t: u32, s: u32, amount: f64) {
        debug_assert!((s as usize) < self.src_vocab.len(), "source id out of range");
        debug_assert!(amount >= 0.0, "counts are non-negative");
        *self.cells[t as usize].entry(s).or_insert(0.0) += amount;
    }

    /// Freeze into an immutable table with cached sums. Zero cells are
    /// dropped; rows end up sorted by source id.
    pub fn freeze(self) -> CoocTable {
        let rows: Vec<Vec<(u32, f64)>> = self
            .cells
            .into_iter()
            .map(|cell| {
                let mut row: Vec<(u32, f64)> = cell
                    .into_iter()
                    .filter(|&(_, v)| v != 0.0)
                    .collect();
                row.sort_unstable_by_key(|&(s, _)| s);
                row
            })
            .collect();
        CoocTable::from_rows(self.tgt_vocab, self.src_vocab, rows)
    }
}

/// Immutable co-occurrence counts `c(t, s)` with cached sums.
#[derive(Debug, Clone, PartialEq)]
pub struct CoocTable {
    tgt_vocab: Vocab,
    src_vocab: Vocab,
    rows: Vec<Vec<(u32, f64)>>,
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
    total: f64,
    max_tgt_chars: usize,
}

impl CoocTable {
    pub(crate) fn from_rows(
        tgt_vocab: Vocab,
        src_vocab: Vocab,
        rows: Vec<Vec<(u32, f64)>>,
    ) -> Self {
        assert_eq!(rows.len(), tgt_vocab.len(), "one row per target token");
        let mut row_sums = vec![0.0; tgt_vocab.len()];
        let mut col_sums = vec![0.0; src_vocab.len()];
        let mut total = 0.0;
        for (t, row) in rows.iter().enumerate() {
            let mut sum = 0.0;
            for &(s, v) in row {
                sum += v;
                col_sums[s as usize] += v;
            }
            row_sums[t] = sum;
            total += sum;
        }
        let max_tgt_chars = tgt_vocab
            .items()
            .iter()
            .map(|s| s.chars().count())
            .max()
            .unwrap_or(0);
        CoocTable {
            tgt_vocab,
            src_vocab,
            rows,
            row_sums,
            col_sums,
            total,
            max_tgt_chars,
        }
    }

    pub fn tgt_vocab(&self) -> &Vocab {
        &self.tgt_vocab
    }

    pub fn src_vocab(&self) -> &Vocab {
        &self.src_vocab
    }

    pub fn tgt_id(&self, piece: &str) -> Option<u32> {
        self.tgt_vocab.id(piece)
    }

    pub fn row(&self, t: u32) -> &[(u32, f64)] {
        &self.rows[t as usize]
    }

    pub fn count(&self, t: u32, s: u32) -> f64 {
        let row = &self.rows[t as usize];
        match row.binary_search_by_key(&s, |&(id, _)| id) {
            Ok(i) => row[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, t: u32) -> f64 {
        self.row_sums[t as usize]
    }

    pub fn col_sum(&self, s: u32) -> f64 {
        self.col_sums[s as usize]
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Longest target token, in characters.
    pub fn max_tgt_chars(&self) -> usize {
        self.max_tgt_chars
    }

    /// Σ over the bag (duplicates count) of `c(t, s)`.
    pub fn row_bag_mass(&self, t: u32, source_bag: &[u32]) -> f64 {
        source_bag.iter().map(|&s| self.count(t, s)).sum()
    }

    /// Σ over the bag (duplicates count) of the column sums — the
    /// conditional-probability denominator over the full target vocabulary.
    pub fn bag_col_mass(&self, source_bag: &[u32]) -> f64 {
        source_bag.iter().map(|&s| self.col_sum(s)).sum()
    }

    /// p(t | S): target-token probability conditioned on a bag of source
    /// tokens. Out-of-vocabulary tokens and an all-zero denominator give 0.
    pub fn cond_prob(&self, t: &str, source_bag: &[u32]) -> f64 {
        assert!(!source_bag.is_empty(), "conditioning bag must be non-empty");
        let Some(t_id) = self.tgt_id(t) else {
            return 0.0;
        };
        let denom = self.bag_col_mass(source_bag);
        if denom == 0.0 {
            return 0.0;
        }
        self.row_bag_mass(t_id, source_bag) / denom
    }

    /// p(t): marginal target-token probability (row mass over the total).
    pub fn marginal_prob(&self, t: &str) -> f64 {
        assert!(self.total > 0.0, "marginals need a non-empty table");
        match self.tgt_id(t) {
            Some(t_id) => self.row_sum(t_id) / self.total,
            None => 0.0,
        }
    }

    /// Distinct vocabulary ids whose token occurs as a substring of
    /// `context`.
    pub fn substring_token_ids(&self, context: &str) -> Vec<u32> {
        let bounds: Vec<usize> = context
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(context.len()))
            .collect();
        let n = bounds.len() - 1;
        let mut seen = HashSet::new();
        let mut ids = Vec::new();
        for start in 0..n {
            for len in 1..=self.max_tgt_chars.min(n - start) {
                let piece = &context[bounds[start]..bounds[start + len]];
                if let Some(id) = self.tgt_id(piece) {
                    if seen.insert(id) {
                        ids.push(id);
                    }
                }
            }
        }
        ids.sort_unstable();
        ids
    }

    /// p(t | s): alignment probability of target token `t` given source
    /// token `s`. With a context, the normalizer runs only over vocabulary
    /// tokens that are substrings of it; otherwise over the whole target
    /// vocabulary (the column sum).
    pub fn align_prob(&self, t: &str, s: &str, context: Option<&str>) -> f64 {
        let (Some(t_id), Some(s_id)) = (self.tgt_id(t), self.src_vocab.id(s)) else {
            return 0.0;
        };
        let denom = match context {
            None => self.col_sum(s_id),
            Some(ctx) => self
                .substring_token_ids(ctx)
                .iter()
                .map(|&u| self.count(u, s_id))
                .sum(),
        };
        if denom == 0.0 {
            return 0.0;
        }
        self.count(t_id, s_id) / denom
    }

    /// Mutual information between target token `t` and the source
    /// vocabulary: Σ_s p(t,s) · ln[p(t,s) / (p(t)·p(s))].
    pub fn mutual_information(&self, t: u32) -> f64 {
        let row = &self.rows[t as usize];
        if row.is_empty() || self.total == 0.0 {
            return 0.0;
        }
        let p_t = self.row_sums[t as usize] / self.total;
        let mut mi = 0.0;
        for &(s, v) in row {
            let p_ts = v / self.total;
            let p_s = self.col_sums[s as usize] / self.total;
            mi += p_ts * (p_ts / (p_t * p_s)).ln();
        }
        mi
    }

    /// Non-zero cells in (target id, source id) order.
    pub fn cells(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(t, row)| row.iter().map(move |&(s, v)| (t as u32, s, v)))
    }
}

/// Lattice score function for p(·|S) with the single-character floor.
pub struct CondScorer<'a> {
    table: &'a CoocTable,
    bag: &'a [u32],
    denom: f64,
    floor: f64,
}

impl<'a> CondScorer<'a> {
    /// With `restrict_to`, the denominator runs only over vocabulary tokens
    /// that are substrings of that text instead of the full vocabulary.
    pub fn new(
        table: &'a CoocTable,
        bag: &'a [u32],
        restrict_to: Option<&str>,
        floor: f64,
    ) -> Self {
        assert!(!bag.is_empty(), "conditioning bag must be non-empty");
        let denom = match restrict_to {
            None => table.bag_col_mass(bag),
            Some(ctx) => table
                .substring_token_ids(ctx)
                .iter()
                .map(|&u| table.row_bag_mass(u, bag))
                .sum(),
        };
        CondScorer {
            table,
            bag,
            denom,
            floor,
        }
    }

    pub fn score(&self, piece: &str) -> f64 {
        let p = match self.table.tgt_id(piece) {
            Some(t_id) if self.denom > 0.0 => {
                self.table.row_bag_mass(t_id, self.bag) / self.denom
            }
            _ => 0.0,
        };
        if p > 0.0 {
            p
        } else if self.floor > 0.0 && is_single_char(piece) {
            self.floor
        } else {
            0.0
        }
    }
}

/// Lattice score function for the marginal p(·) with the single-character
/// floor.
pub struct MarginalScorer<'a> {
    table: &'a CoocTable,
    floor: f64,
}

impl<'a> MarginalScorer<'a> {
    pub fn new(table: &'a CoocTable, floor: f64) -> Self {
        MarginalScorer { table, floor }
    }

    pub fn score(&self, piece: &str) -> f64 {
        let p = match self.table.tgt_id(piece) {
            Some(t_id) if self.table.total() > 0.0 => {
                self.table.row_sum(t_id) / self.table.total()
            }
            _ => 0.0,
        };
        if p > 0.0 {
            p
        } else if self.floor > 0.0 && is_single_char(piece) {
            self.floor
        } else {
            0.0
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// c(a,x)=1 c(b,x)=1 c(ab,x)=2 c(a,y)=2 c(b,y)=2; total 8.
    pub(crate) fn toy_table() -> CoocTable {
        let tgt = Vocab::from_items(["a", "ab", "b"]);
        let src = Vocab::from_items([NULL_TOKEN, "x", "y"]);
        let mut b = CoocBuilder::new(tgt, src);
        let (a, ab, bb) = (0, 1, 2);
        let (x, y) = (1, 2);
        b.add(a, x, 1.0);
        b.add(bb, x, 1.0);
        b.add(ab, x, 2.0);
        b.add(a, y, 2.0);
        b.add(bb, y, 2.0);
        b.freeze()
    }

    #[test]
    fn cached_sums_match_cells() {
        let t = toy_table();
        assert_eq!(t.total(), 8.0);
        assert_eq!(t.row_sum(t.tgt_id("ab").unwrap()), 2.0);
        assert_eq!(t.col_sum(t.src_vocab().id("x").unwrap()), 4.0);
        assert_eq!(t.col_sum(t.src_vocab().id(NULL_TOKEN).unwrap()), 0.0);
        let recomputed: f64 = t.cells().map(|(_, _, v)| v).sum();
        assert!((recomputed - t.total()).abs() < 1e-12);
    }

    #[test]
    fn cond_prob_uses_full_vocabulary_denominator() {
        let t = toy_table();
        let x = t.src_vocab().id("x").unwrap();
        let y = t.src_vocab().id("y").unwrap();
        assert!((t.cond_prob("ab", &[x]) - 0.5).abs() < 1e-12);
        assert!((t.cond_prob("ab", &[x, y]) - 0.25).abs() < 1e-12);
        assert_eq!(t.cond_prob("zz", &[x]), 0.0);
    }

    #[test]
    fn cond_prob_duplicate_sources_count_twice() {
        let t = toy_table();
        let x = t.src_vocab().id("x").unwrap();
        // numerator 2·c(ab,x)=4, denominator 2·col(x)=8
        assert!((t.cond_prob("ab", &[x, x]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cond_prob_sums_to_one_over_vocab() {
        let t = toy_table();
        let x = t.src_vocab().id("x").unwrap();
        let y = t.src_vocab().id("y").unwrap();
        for bag in [vec![x], vec![y], vec![x, y], vec![y, y, x]] {
            let sum: f64 = t
                .tgt_vocab()
                .items()
                .iter()
                .map(|piece| t.cond_prob(piece, &bag))
                .sum();
            assert!((sum - 1.0).abs() < 1e-12, "bag {bag:?} sums to {sum}");
        }
    }

    #[test]
    fn marginal_matches_row_share() {
        let t = toy_table();
        assert!((t.marginal_prob("ab") - 0.25).abs() < 1e-12);
        let sum: f64 = t
            .tgt_vocab()
            .items()
            .iter()
            .map(|piece| t.marginal_prob(piece))
            .sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(t.marginal_prob("zz"), 0.0);
    }

    #[test]
    fn align_prob_full_and_context_restricted() {
        let t = toy_table();
        assert!((t.align_prob("ab", "x", None) - 0.5).abs() < 1e-12);
        // substrings of "ab" are exactly {a, ab, b}: denominator 1+2+1.
        assert!((t.align_prob("ab", "x", Some("ab")) - 0.5).abs() < 1e-12);
        // substrings of "a": just {a}: c(a,y)/c(a,y) = 1.
        assert!((t.align_prob("a", "y", Some("a")) - 1.0).abs() < 1e-12);
        assert_eq!(t.align_prob("ab", "y", None), 0.0);
        assert_eq!(t.align_prob("ab", NULL_TOKEN, None), 0.0);
    }

    #[test]
    fn align_prob_columns_sum_to_one() {
        let t = toy_table();
        for s in ["x", "y"] {
            let sum: f64 = t
                .tgt_vocab()
                .items()
                .iter()
                .map(|piece| t.align_prob(piece, s, None))
                .sum();
            assert!((sum - 1.0).abs() < 1e-12);
            let restricted: f64 = t
                .tgt_vocab()
                .items()
                .iter()
                .filter(|piece| "ab".contains(piece.as_str()))
                .map(|piece| t.align_prob(piece, s, Some("ab")))
                .sum();
            assert!((restricted - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mutual_information_hand_value() {
        let t = toy_table();
        let ab = t.tgt_id("ab").unwrap();
        // only the x cell is non-zero: 0.25 · ln(0.25 / (0.25·0.5))
        let expected = 0.25 * 2.0_f64.ln();
        assert!((t.mutual_information(ab) - expected).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_zero_for_independence_and_single_cell() {
        // independent: c(t,s) = row·col/total for all cells
        let tgt = Vocab::from_items(["a", "b"]);
        let src = Vocab::from_items([NULL_TOKEN, "x", "y"]);
        let mut b = CoocBuilder::new(tgt, src);
        for (t, tv) in [(0u32, 1.0), (1u32, 3.0)] {
            for (s, sv) in [(1u32, 2.0), (2u32, 2.0)] {
                b.add(t, s, tv * sv / 4.0);
            }
        }
        let t = b.freeze();
        assert!(t.mutual_information(0).abs() < 1e-12);
        assert!(t.mutual_information(1).abs() < 1e-12);

        let tgt = Vocab::from_items(["a"]);
        let src = Vocab::from_items([NULL_TOKEN, "x"]);
        let mut b = CoocBuilder::new(tgt, src);
        b.add(0, 1, 4.0);
        let t = b.freeze();
        assert_eq!(t.mutual_information(0), 0.0);
    }

    #[test]
    fn mutual_information_brute_force_oracle() {
        let t = toy_table();
        for (t_id, piece) in [(0u32, "a"), (1, "ab"), (2, "b")] {
            let mut expected = 0.0;
            for s_id in 0..t.src_vocab().len() as u32 {
                let c = t.count(t_id, s_id);
                if c == 0.0 {
                    continue;
                }
                let p_ts = c / t.total();
                let p_t = t.row_sum(t_id) / t.total();
                let p_s = t.col_sum(s_id) / t.total();
                expected += p_ts * (p_ts / (p_t * p_s)).ln();
            }
            let got = t.mutual_information(t_id);
            assert!(
                (got - expected).abs() < 1e-12,
                "MI({piece}) = {got}, oracle {expected}"
            );
            assert!(got >= -1e-12, "MI({piece}) negative: {got}");
        }
    }

    #[test]
    fn scorers_apply_character_floor() {
        let t = toy_table();
        let y = t.src_vocab().id("y").unwrap();
        let bag = [y];
        let s = CondScorer::new(&t, &bag, None, char_floor());
        assert!((s.score("a") - 0.5).abs() < 1e-12);
        assert_eq!(s.score("ab"), 0.0); // multi-char, zero mass: no floor
        assert!((s.score("z") - char_floor()).abs() < 1e-30); // unknown char
        let m = MarginalScorer::new(&t, char_floor());
        assert!((m.score("ab") - 0.25).abs() < 1e-12);
        assert!((m.score("z") - char_floor()).abs() < 1e-30);
    }

    #[test]
    fn restricted_denominator_renormalizes_over_substrings() {
        let t = toy_table();
        let x = t.src_vocab().id("x").unwrap();
        let bag = [x];
        // substrings of "ab": a(1) + ab(2) + b(1) = 4 = full col; same here.
        let s = CondScorer::new(&t, &bag, Some("ab"), 0.0);
        assert!((s.score("ab") - 0.5).abs() < 1e-12);
        // substrings of "a": denominator just c(a,x)=1.
        let s = CondScorer::new(&t, &bag, Some("a"), 0.0);
        assert!((s.score("a") - 1.0).abs() < 1e-12);
    }
}
