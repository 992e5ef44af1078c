//! The fixed prompt templates and slot filling.

use serde::{Deserialize, Serialize};

use super::{GatewayError, GatewayResult};

pub const SLOT_ESSAY: &str = "[ESSAY]";
pub const SLOT_CORRECTED: &str = "[CORRECTED ESSAY]";
pub const SLOT_FEEDBACK: &str = "[FEEDBACK]";
pub const SLOT_ERRANT: &str = "[ERRANT M2 FILE]";

pub const GEC_TEMPLATE: &str = "Read the following essay written by an L2 learner of English: [ESSAY]\n\nProvide the grammatically corrected version of the essay without adding any comment, note, or explanation.";

pub const GEF_WITH_GEC_TEMPLATE: &str = "Read the following essay written by an L2 learner of English and its respective corrected version:\n\nOriginal: [ESSAY]\n\nCorrected: [CORRECTED ESSAY]\n\nProvide grammatical feedback to the learner based on the differences between the original and the corrected version. Start your feedback with \"Dear learner\".";

pub const GEF_WITH_GEC_100_TEMPLATE: &str = "Read the following essay written by an L2 learner of English and its respective corrected version:\n\nOriginal: [ESSAY]\n\nCorrected: [CORRECTED ESSAY]\n\nProvide grammatical feedback to the learner based on the differences between the original and the corrected version. You don't have to provide a revised version of the essay. Start your feedback with \"Dear learner\".";

pub const GEF_NO_GEC_TEMPLATE: &str = "Read the following essay written by an L2 learner of English: [ESSAY]\n\nProvide grammatical feedback to the learner. You don't have to provide a revised version of the essay. Start your feedback with \"Dear learner\".";

pub const ESSAY_MATCH_TEMPLATE: &str = "Read the following essay written by an L2 learner of English: [ESSAY]\n\nNow, read the following feedback: [FEEDBACK]\n\nIs it correct, appropriate and thorough? Just say yes or no without providing any additional comment, note or explanation.";

pub const FEEDBACK_MATCH_TEMPLATE: &str = "Read the following feedback response to an essay written by an L2 learner: [FEEDBACK]\n\nNow, read this ERRANT (ERRor ANnotation Toolkit) file: [ERRANT M2 FILE]\n\nin which M: missing, R: replace, U: unnecessary, ADJ: adjective, ADV: adverb, CONJ: conjunction, DET: determiner, NOUN: noun, PART: particle, PREP: preposition, PRON: pronoun, PUNCT: punctuation, VERB: verb, CONTR: contraction, OTHER: other, MORPH: morphology, ORTH: orthography, SPELL: spelling, WO: word order, FORM: form, INFL: inflection, NUM: number, POSS: possessive, SVA: agreement, TENSE: tense.\n\nDoes the feedback response explain the ERRANT file correctly, appropriately and thoroughly? Just say yes or no without providing any additional comment, note or explanation.";

/// The six prompt shapes used by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptKind {
    Gec,
    GefWithGec,
    GefWithGec100,
    GefNoGec,
    EssayMatch,
    FeedbackMatch,
}

impl PromptKind {
    pub const ALL: [PromptKind; 6] = [
        PromptKind::Gec,
        PromptKind::GefWithGec,
        PromptKind::GefWithGec100,
        PromptKind::GefNoGec,
        PromptKind::EssayMatch,
        PromptKind::FeedbackMatch,
    ];

    pub fn template(self) -> &'static str {
        match self {
            PromptKind::Gec => GEC_TEMPLATE,
            PromptKind::GefWithGec => GEF_WITH_GEC_TEMPLATE,
            PromptKind::GefWithGec100 => GEF_WITH_GEC_100_TEMPLATE,
            PromptKind::GefNoGec => GEF_NO_GEC_TEMPLATE,
            PromptKind::EssayMatch => ESSAY_MATCH_TEMPLATE,
            PromptKind::FeedbackMatch => FEEDBACK_MATCH_TEMPLATE,
        }
    }

    /// Slot markers this template expects.
    pub fn slots(self) -> &'static [&'static str] {
        match self {
            PromptKind::Gec => &[SLOT_ESSAY],
            PromptKind::GefWithGec | PromptKind::GefWithGec100 => &[SLOT_ESSAY, SLOT_CORRECTED],
            PromptKind::GefNoGec => &[SLOT_ESSAY],
            PromptKind::EssayMatch => &[SLOT_ESSAY, SLOT_FEEDBACK],
            PromptKind::FeedbackMatch => &[SLOT_FEEDBACK, SLOT_ERRANT],
        }
    }
}

/// Values for the slot markers. Unused fields are ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct PromptSlots<'a> {
    pub essay: Option<&'a str>,
    pub corrected_essay: Option<&'a str>,
    pub feedback: Option<&'a str>,
    pub errant_file: Option<&'a str>,
}

/// Fills the template for `kind`. Every slot the template mentions must be
/// provided; anything else is left untouched.
pub fn render_prompt(kind: PromptKind, slots: &PromptSlots) -> GatewayResult<String> {
    let mut text = kind.template().to_string();
    for &marker in kind.slots() {
        let value = match marker {
            SLOT_ESSAY => slots.essay,
            SLOT_CORRECTED => slots.corrected_essay,
            SLOT_FEEDBACK => slots.feedback,
            SLOT_ERRANT => slots.errant_file,
            _ => unreachable!(),
        };
        let value = value.ok_or(GatewayError::MissingSlot {
            kind,
            slot: marker,
        })?;
        text = text.replace(marker, value);
    }
    Ok(text)
}
