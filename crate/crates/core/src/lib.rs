//! Toolkit for studying how language models learn negative polarity item
//! (NPI) licensing as a family of related tasks.
//!
//! The pipeline: parse dependency-annotated corpora ([`corpus`]), find NPI
//! and licensor phrases ([`lexicon`]), link them through the dependency tree
//! ([`scope`]), build single-context corpora ([`ablation`]), train a
//! checkpointed LSTM language model ([`lm`]), score minimal pairs at every
//! checkpoint ([`pairs`]), and extract learning-dynamics metrics
//! ([`dynamics`]). [`synth`] generates corpora with gold annotations.

pub mod corpus;
pub mod lexicon;
pub mod scope;
pub mod ablation;
pub mod lm;
pub mod dynamics;
pub mod pairs;
pub mod synth;
