//! Source-conditioned tokenization with a trained co-occurrence table.
//!
//! A [`PairedModel`] bundles the source-side tokenizer, the target×source
//! count table, and the configuration it was trained with. Target text is
//! segmented word by word with a Viterbi lattice whose span scores are the
//! conditional probabilities given the bag of source tokens; without a
//! usable source sentence it falls back to the marginal distribution.

use std::collections::HashMap;

use crate::cooc::{char_floor, CondScorer, CoocTable, MarginalScorer};
use crate::lattice::Lattice;
use crate::textnorm::{pretokenize, NormalizedText, MARKER};
use crate::trainer::TrainConfig;
use crate::unigram::UnigramModel;

/// Tokens plus a flag recording whether the source sentence was unusable
/// (empty bag) and the marginal distribution was used instead.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedTokenization {
    pub tokens: Vec<String>,
    pub used_marginal_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedModel {
    src_model: UnigramModel,
    table: CoocTable,
    config: TrainConfig,
}

impl PairedModel {
    pub fn new(src_model: UnigramModel, table: CoocTable, config: TrainConfig) -> Self {
        PairedModel {
            src_model,
            table,
            config,
        }
    }

    pub fn src_model(&self) -> &UnigramModel {
        &self.src_model
    }

    pub fn table(&self) -> &CoocTable {
        &self.table
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Bag of source-side ids for a source sentence: tokenize with the
    /// source model, keep the tokens the table knows. Duplicates stay.
    pub fn source_bag(&self, source: &NormalizedText) -> Vec<u32> {
        self.src_model
            .tokenize(source)
            .iter()
            .filter_map(|piece| self.table.src_vocab().id(piece))
            .collect()
    }

    fn words(text: &NormalizedText) -> Vec<String> {
        let words = pretokenize(text);
        if words.is_empty() {
            vec![MARKER.to_string()]
        } else {
            words
        }
    }

    /// Segment a target sentence given a non-empty bag of source ids.
    /// Every word is segmented independently; characters outside the table
    /// vocabulary are floored, so tokenization never fails.
    pub fn tokenize_with_bag(&self, target: &NormalizedText, bag: &[u32]) -> Vec<String> {
        assert!(!bag.is_empty(), "conditioning needs a non-empty source bag");
        let mut tokens = Vec::new();
        for word in Self::words(target) {
            let restrict = self
                .config
                .restrict_cond_denominator
                .then_some(word.as_str());
            let scorer = CondScorer::new(&self.table, bag, restrict, char_floor());
            let lattice = Lattice::new(&word, |p| scorer.score(p), self.config.max_piece_len);
            let segmented = lattice
                .viterbi()
                .expect("character floor keeps every word coverable");
            tokens.extend(segmented.into_iter().map(str::to_string));
        }
        tokens
    }

    /// Segment a target sentence with the source-independent marginal
    /// token distribution.
    pub fn tokenize_marginal(&self, target: &NormalizedText) -> Vec<String> {
        let scorer = MarginalScorer::new(&self.table, char_floor());
        let mut tokens = Vec::new();
        for word in Self::words(target) {
            let lattice = Lattice::new(&word, |p| scorer.score(p), self.config.max_piece_len);
            let segmented = lattice
                .viterbi()
                .expect("character floor keeps every word coverable");
            tokens.extend(segmented.into_iter().map(str::to_string));
        }
        tokens
    }

    /// Segment a target sentence conditioned on a source sentence. If no
    /// source token is usable the marginal distribution is used and the
    /// fallback flag is set.
    pub fn tokenize_paired(
        &self,
        target: &NormalizedText,
        source: &NormalizedText,
    ) -> PairedTokenization {
        let bag = self.source_bag(source);
        if bag.is_empty() {
            PairedTokenization {
                tokens: self.tokenize_marginal(target),
                used_marginal_fallback: true,
            }
        } else {
            PairedTokenization {
                tokens: self.tokenize_with_bag(target, &bag),
                used_marginal_fallback: false,
            }
        }
    }

    /// Link each target token to the source token position with the
    /// highest conditional alignment probability, renormalized over
    /// vocabulary entries that are substrings of the tokenized target.
    /// Tokens with no positive-probability source stay unlinked (`None`);
    /// ties resolve to the lowest position.
    pub fn extract_alignment(
        &self,
        target_tokens: &[String],
        source_tokens: &[String],
    ) -> Vec<Option<usize>> {
        let context: String = target_tokens.concat();
        let sub_ids = self.table.substring_token_ids(&context);
        let src_ids: Vec<Option<u32>> = source_tokens
            .iter()
            .map(|s| self.table.src_vocab().id(s))
            .collect();
        let mut denoms: HashMap<u32, f64> = HashMap::new();
        for &s_id in src_ids.iter().flatten() {
            denoms
                .entry(s_id)
                .or_insert_with(|| sub_ids.iter().map(|&t| self.table.count(t, s_id)).sum());
        }
        target_tokens
            .iter()
            .map(|token| {
                let t_id = self.table.tgt_id(token)?;
                let mut best: Option<usize> = None;
                let mut best_p = 0.0;
                for (pos, s_id) in src_ids.iter().enumerate() {
                    let Some(s_id) = s_id else { continue };
                    let denom = denoms[s_id];
                    if denom <= 0.0 {
                        continue;
                    }
                    let p = self.table.count(t_id, *s_id) / denom;
                    if p > best_p {
                        best_p = p;
                        best = Some(pos);
                    }
                }
                best
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooc::tests::toy_table;
    use crate::cooc::CoocBuilder;
    use crate::textnorm::normalize;

    fn toy_model() -> PairedModel {
        let src_model = UnigramModel::from_pieces(vec![
            ("x".into(), 0.5f64.ln()),
            ("y".into(), 0.5f64.ln()),
        ])
        .unwrap();
        let config = TrainConfig {
            vocab_size: 16,
            max_piece_len: 2,
            ..TrainConfig::default()
        };
        PairedModel::new(src_model, toy_table(), config)
    }

    #[test]
    fn conditioning_changes_the_segmentation() {
        let model = toy_model();
        let target = normalize("ab");
        // x favors the fused token, y has never seen it
        assert_eq!(model.tokenize_with_bag(&target, &[1]), vec!["▁", "ab"]);
        assert_eq!(model.tokenize_with_bag(&target, &[2]), vec!["▁", "a", "b"]);
        assert_eq!(model.tokenize_with_bag(&target, &[1, 2]), vec!["▁", "ab"]);
    }

    #[test]
    fn bag_order_does_not_matter() {
        let model = toy_model();
        let target = normalize("ab");
        assert_eq!(
            model.tokenize_with_bag(&target, &[1, 2]),
            model.tokenize_with_bag(&target, &[2, 1])
        );
    }

    #[test]
    fn scaling_all_counts_preserves_the_segmentation() {
        let model = toy_model();
        let mut b = CoocBuilder::new(
            model.table().tgt_vocab().clone(),
            model.table().src_vocab().clone(),
        );
        for (t, s, v) in model.table().cells() {
            b.add(t, s, 3.0 * v);
        }
        let scaled = PairedModel::new(model.src_model().clone(), b.freeze(), model.config().clone());
        for text in ["ab", "ba", "aab"] {
            let target = normalize(text);
            assert_eq!(
                model.tokenize_with_bag(&target, &[1]),
                scaled.tokenize_with_bag(&target, &[1])
            );
        }
    }

    #[test]
    fn marginal_segmentation_uses_pooled_counts() {
        let model = toy_model();
        // p(ab)=1/4 beats p(a)p(b)=9/64
        assert_eq!(model.tokenize_marginal(&normalize("ab")), vec!["▁", "ab"]);
    }

    #[test]
    fn source_bag_keeps_known_pieces_only() {
        let model = toy_model();
        assert_eq!(model.source_bag(&normalize("x")), vec![1]);
        assert_eq!(model.source_bag(&normalize("x y")), vec![1, 2]);
        assert_eq!(model.source_bag(&normalize("zz")), Vec::<u32>::new());
    }

    #[test]
    fn unusable_source_falls_back_to_the_marginal() {
        let model = toy_model();
        let out = model.tokenize_paired(&normalize("ab"), &normalize("zz"));
        assert!(out.used_marginal_fallback);
        assert_eq!(out.tokens, vec!["▁", "ab"]);
        let out = model.tokenize_paired(&normalize("ab"), &normalize("y"));
        assert!(!out.used_marginal_fallback);
        assert_eq!(out.tokens, vec!["▁", "a", "b"]);
    }

    #[test]
    fn tokens_always_concatenate_back_to_the_text() {
        let model = toy_model();
        for text in ["ab", "a¤b", "", "¤¤", "ab ba"] {
            let target = normalize(text);
            let tokens = model.tokenize_with_bag(&target, &[1]);
            assert_eq!(tokens.concat(), target.as_str(), "text {text:?}");
        }
    }

    #[test]
    fn alignment_links_tokens_to_their_best_source() {
        let model = toy_model();
        let tokens = |ts: &[&str]| ts.iter().map(|t| t.to_string()).collect::<Vec<_>>();
        // "ab" co-occurs with x only
        assert_eq!(
            model.extract_alignment(&tokens(&["ab"]), &tokens(&["x", "y"])),
            vec![Some(0)]
        );
        assert_eq!(
            model.extract_alignment(&tokens(&["ab"]), &tokens(&["y", "x"])),
            vec![Some(1)]
        );
        // zero-probability everywhere: unlinked
        assert_eq!(
            model.extract_alignment(&tokens(&["ab"]), &tokens(&["y"])),
            vec![None]
        );
        // unknown source and target tokens never link
        assert_eq!(
            model.extract_alignment(&tokens(&["ab"]), &tokens(&["q"])),
            vec![None]
        );
        assert_eq!(
            model.extract_alignment(&tokens(&["¤"]), &tokens(&["x"])),
            vec![None]
        );
    }

    #[test]
    fn alignment_ties_resolve_to_the_lowest_position() {
        let model = toy_model();
        let tokens = |ts: &[&str]| ts.iter().map(|t| t.to_string()).collect::<Vec<_>>();
        assert_eq!(
            model.extract_alignment(&tokens(&["a", "b"]), &tokens(&["y", "y"])),
            vec![Some(0), Some(0)]
        );
    }
}
