//! Offline backends. `mock:echo` answers with a digest of the prompt,
//! `mock:oracle` plays a generator/judge pair that recognizes its own
//! feedback, `mock:uniform` always answers 50/50, and `mock:calibrated`
//! answers with a probability that decays in the rate distance between what
//! the feedback describes and what it is probed against.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};

use crate::lineup::Rate;

use super::prompt::{
    FEEDBACK_MATCH_TEMPLATE, GEC_TEMPLATE, GEF_NO_GEC_TEMPLATE, GEF_WITH_GEC_TEMPLATE,
};
use super::{ChatOutcome, ChatRequest, GatewayResult};

pub const MATCH_P: f64 = 0.9;
pub const MISMATCH_P: f64 = 0.1;

/// 16-hex-character content id used by the mocks to recognize texts.
pub fn digest16(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockKind {
    Echo,
    Oracle,
    Uniform,
    Calibrated,
}

/// What the domain mocks know about the lineup under test. The pipeline
/// registers every version before probing.
#[derive(Clone, Default)]
pub struct MockRegistry {
    inner: Arc<Mutex<RegistryInner>>,
}

#[derive(Default)]
struct RegistryInner {
    /// version text digest -> (essay id, rate)
    versions: HashMap<String, (String, Rate)>,
    /// serialized residual body -> versions it describes
    bodies: HashMap<String, Vec<(String, Rate, String)>>,
}

impl MockRegistry {
    pub fn new() -> MockRegistry {
        MockRegistry::default()
    }

    /// Declares one lineup version and the redacted bodies of its residual.
    pub fn register_version(&self, essay_id: &str, rate: Rate, text: &str, bodies: &[String]) {
        let digest = digest16(text);
        let mut inner = self.inner.lock().unwrap();
        inner
            .versions
            .insert(digest.clone(), (essay_id.to_string(), rate));
        for body in bodies {
            // Empty bodies (fully corrected versions) are registered too:
            // an empty annotation block identifies the rate-1 member.
            let entry = (essay_id.to_string(), rate, digest.clone());
            let slot = inner.bodies.entry(body.clone()).or_default();
            if !slot.contains(&entry) {
                slot.push(entry);
            }
        }
    }

    fn version_of_digest(&self, digest: &str) -> Option<(String, Rate)> {
        self.inner.lock().unwrap().versions.get(digest).cloned()
    }

    fn body_entries(&self, body: &str) -> Vec<(String, Rate, String)> {
        self.inner
            .lock()
            .unwrap()
            .bodies
            .get(body)
            .cloned()
            .unwrap_or_default()
    }
}

fn between<'a>(text: &'a str, prefix: &str, suffix: &str) -> Option<&'a str> {
    let at = text.find(prefix)? + prefix.len();
    let end = text[at..].find(suffix)? + at;
    Some(&text[at..end])
}

fn template_head(template: &str) -> &str {
    let cut = template.find('[').unwrap_or(template.len());
    &template[..cut]
}

fn template_tail_after_first_slot(template: &str) -> &str {
    let open = template.find('[').unwrap();
    let close = template[open..].find(']').unwrap() + open + 1;
    let rest = &template[close..];
    let next = rest.find('[').unwrap_or(rest.len());
    &rest[..next]
}

/// The parsed shape of a rendered prompt, recovered by matching against the
/// known templates.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedPrompt {
    Gec { essay: String },
    Feedback { essay: String },
    EssayMatch { essay: String, feedback: String },
    FeedbackMatch { feedback: String, body: String },
    Unknown,
}

/// Recovers slot values from a prompt rendered out of the fixed templates.
pub fn parse_prompt(prompt: &str) -> ParsedPrompt {
    let gef_head = template_head(GEF_WITH_GEC_TEMPLATE);
    if prompt.starts_with(gef_head) {
        // Original/Corrected variants only need the original essay.
        if let Some(essay) = between(prompt, "Original: ", "\n\nCorrected: ") {
            return ParsedPrompt::Feedback {
                essay: essay.to_string(),
            };
        }
        return ParsedPrompt::Unknown;
    }
    let fbm_head = template_head(FEEDBACK_MATCH_TEMPLATE);
    if prompt.starts_with(fbm_head) {
        let feedback = between(prompt, fbm_head, template_tail_after_first_slot(FEEDBACK_MATCH_TEMPLATE));
        let body = between(prompt, "file: ", "\n\nin which");
        if let (Some(feedback), Some(body)) = (feedback, body) {
            return ParsedPrompt::FeedbackMatch {
                feedback: feedback.to_string(),
                body: body.to_string(),
            };
        }
        return ParsedPrompt::Unknown;
    }
    let shared_head = template_head(GEC_TEMPLATE);
    if let Some(rest) = prompt.strip_prefix(shared_head) {
        if let Some(essay) = rest.strip_suffix(&GEC_TEMPLATE[GEC_TEMPLATE.find(']').unwrap() + 1..]) {
            if !essay.contains("\n\n") {
                return ParsedPrompt::Gec {
                    essay: essay.to_string(),
                };
            }
        }
        if let Some(essay) = rest.strip_suffix(&GEF_NO_GEC_TEMPLATE[GEF_NO_GEC_TEMPLATE.find(']').unwrap() + 1..]) {
            if !essay.contains("\n\n") {
                return ParsedPrompt::Feedback {
                    essay: essay.to_string(),
                };
            }
        }
        if let Some(essay) = between(prompt, shared_head, "\n\nNow, read the following feedback: ") {
            if let Some(feedback) = between(prompt, "\n\nNow, read the following feedback: ", "\n\nIs it correct") {
                return ParsedPrompt::EssayMatch {
                    essay: essay.to_string(),
                    feedback: feedback.to_string(),
                };
            }
        }
    }
    ParsedPrompt::Unknown
}

/// Pulls the `mock:<digest>` tag out of a generated feedback text.
fn feedback_digest(feedback: &str) -> Option<String> {
    let at = feedback.find("mock:")? + 5;
    let hex: String = feedback[at..]
        .chars()
        .take_while(|c| c.is_ascii_hexdigit())
        .collect();
    (hex.len() == 16).then_some(hex)
}

fn yes_no_outcome(p_yes: f64) -> ChatOutcome {
    let p_yes = p_yes.clamp(1e-9, 1.0 - 1e-9);
    let (first, second) = if p_yes >= 0.5 {
        (("Yes", p_yes), ("No", 1.0 - p_yes))
    } else {
        (("No", 1.0 - p_yes), ("Yes", p_yes))
    };
    ChatOutcome {
        text: first.0.to_string(),
        first_token: Some(first.0.to_string()),
        top_logprobs: Some(vec![
            (first.0.to_string(), first.1.ln()),
            (second.0.to_string(), second.1.ln()),
        ]),
    }
}

fn text_outcome(text: String, with_logprobs: bool) -> ChatOutcome {
    let first = text.split_whitespace().next().unwrap_or("").to_string();
    ChatOutcome {
        first_token: with_logprobs.then(|| first.clone()),
        top_logprobs: with_logprobs.then(|| vec![(first, -1e-9)]),
        text,
    }
}

/// Probability the calibrated judge answers yes, strictly decreasing in the
/// rate distance.
pub fn calibrated_p(own: Rate, probed: Rate) -> f64 {
    let d = (own.as_f64() - probed.as_f64()).abs();
    MATCH_P * (-4.0 * d).exp()
}

pub fn mock_chat(
    kind: MockKind,
    registry: &MockRegistry,
    req: &ChatRequest,
) -> GatewayResult<ChatOutcome> {
    let parsed = parse_prompt(&req.prompt);
    let out = match kind {
        MockKind::Echo => text_outcome(format!("echo:{}", digest16(&req.prompt)), false),
        MockKind::Uniform => match parsed {
            ParsedPrompt::EssayMatch { .. } | ParsedPrompt::FeedbackMatch { .. } => {
                yes_no_outcome(0.5)
            }
            _ => text_outcome(format!("echo:{}", digest16(&req.prompt)), true),
        },
        MockKind::Oracle | MockKind::Calibrated => match parsed {
            ParsedPrompt::Gec { essay } => text_outcome(essay, true),
            ParsedPrompt::Feedback { essay } => text_outcome(
                format!(
                    "Dear learner, the points below refer to your text mock:{} as submitted.",
                    digest16(&essay)
                ),
                true,
            ),
            ParsedPrompt::EssayMatch { essay, feedback } => {
                let essay_digest = digest16(&essay);
                match (kind, feedback_digest(&feedback)) {
                    (MockKind::Oracle, Some(fd)) => {
                        yes_no_outcome(if fd == essay_digest { MATCH_P } else { MISMATCH_P })
                    }
                    (MockKind::Calibrated, Some(fd)) => {
                        let own = registry.version_of_digest(&fd);
                        let probed = registry.version_of_digest(&essay_digest);
                        match (own, probed) {
                            (Some((_, r_own)), Some((_, r_probed))) => {
                                yes_no_outcome(calibrated_p(r_own, r_probed))
                            }
                            _ => yes_no_outcome(0.5),
                        }
                    }
                    _ => yes_no_outcome(0.5),
                }
            }
            ParsedPrompt::FeedbackMatch { feedback, body } => {
                let entries = registry.body_entries(&body);
                match feedback_digest(&feedback) {
                    Some(fd) => match kind {
                        MockKind::Oracle => {
                            let hit = entries.iter().any(|(_, _, digest)| *digest == fd);
                            yes_no_outcome(if hit { MATCH_P } else { MISMATCH_P })
                        }
                        MockKind::Calibrated => {
                            let own = registry.version_of_digest(&fd);
                            match own {
                                Some((essay_id, r_own)) => {
                                    let row = entries
                                        .iter()
                                        .find(|(id, _, _)| *id == essay_id)
                                        .or_else(|| entries.first());
                                    match row {
                                        Some((_, r_row, _)) => {
                                            yes_no_outcome(calibrated_p(*r_row, r_own))
                                        }
                                        None => yes_no_outcome(0.5),
                                    }
                                }
                                None => yes_no_outcome(0.5),
                            }
                        }
                        _ => unreachable!(),
                    },
                    None => yes_no_outcome(MISMATCH_P),
                }
            }
            ParsedPrompt::Unknown => text_outcome(format!("echo:{}", digest16(&req.prompt)), true),
        },
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::prompt::{render_prompt, PromptKind, PromptSlots};

    fn req(prompt: String) -> ChatRequest {
        ChatRequest::new("mock:test", prompt)
    }

    #[test]
    fn parses_every_template() {
        let essay = "I can liste to music .";
        let slots = PromptSlots {
            essay: Some(essay),
            corrected_essay: Some("I can listen to music ."),
            feedback: Some("Dear learner, mock:0011223344556677 is yours."),
            errant_file: Some("A 2 3|||R:SPELL|||listen|||REQUIRED|||-NONE-|||0"),
        };
        let gec = render_prompt(PromptKind::Gec, &slots).unwrap();
        assert_eq!(parse_prompt(&gec), ParsedPrompt::Gec { essay: essay.into() });

        for kind in [PromptKind::GefWithGec, PromptKind::GefWithGec100, PromptKind::GefNoGec] {
            let p = render_prompt(kind, &slots).unwrap();
            assert_eq!(parse_prompt(&p), ParsedPrompt::Feedback { essay: essay.into() }, "{kind:?}");
        }

        let em = render_prompt(PromptKind::EssayMatch, &slots).unwrap();
        assert_eq!(
            parse_prompt(&em),
            ParsedPrompt::EssayMatch {
                essay: essay.into(),
                feedback: "Dear learner, mock:0011223344556677 is yours.".into()
            }
        );

        let fm = render_prompt(PromptKind::FeedbackMatch, &slots).unwrap();
        assert_eq!(
            parse_prompt(&fm),
            ParsedPrompt::FeedbackMatch {
                feedback: "Dear learner, mock:0011223344556677 is yours.".into(),
                body: "A 2 3|||R:SPELL|||listen|||REQUIRED|||-NONE-|||0".into()
            }
        );
    }

    #[test]
    fn oracle_recognizes_its_own_feedback() {
        let registry = MockRegistry::new();
        let essay = "He go to school .";
        let other = "He went to school .";

        let gen_prompt = render_prompt(
            PromptKind::GefNoGec,
            &PromptSlots { essay: Some(essay), ..Default::default() },
        )
        .unwrap();
        let feedback = mock_chat(MockKind::Oracle, &registry, &req(gen_prompt)).unwrap().text;
        assert!(feedback.contains(&format!("mock:{}", digest16(essay))));

        let probe = |probed: &str| {
            let p = render_prompt(
                PromptKind::EssayMatch,
                &PromptSlots {
                    essay: Some(probed),
                    feedback: Some(&feedback),
                    ..Default::default()
                },
            )
            .unwrap();
            mock_chat(MockKind::Oracle, &registry, &req(p)).unwrap()
        };
        let same = probe(essay);
        let diff = probe(other);
        assert_eq!(same.text, "Yes");
        assert_eq!(diff.text, "No");
    }

    #[test]
    fn oracle_matches_bodies_through_the_registry() {
        let registry = MockRegistry::new();
        let text_a = "I has a dog .";
        let text_b = "I have a dog .";
        let body_a = "A 1 2|||R:VERB:SVA|||have|||REQUIRED|||-NONE-|||0".to_string();
        registry.register_version("e1", Rate::ZERO, text_a, &[body_a.clone()]);
        registry.register_version("e1", Rate::FULL, text_b, &[]);

        let feedback_for = |text: &str| format!("Dear learner, mock:{} reviewed.", digest16(text));
        let probe = |feedback: &str, body: &str| {
            let p = render_prompt(
                PromptKind::FeedbackMatch,
                &PromptSlots {
                    feedback: Some(feedback),
                    errant_file: Some(body),
                    ..Default::default()
                },
            )
            .unwrap();
            mock_chat(MockKind::Oracle, &registry, &req(p)).unwrap()
        };
        assert_eq!(probe(&feedback_for(text_a), &body_a).text, "Yes");
        assert_eq!(probe(&feedback_for(text_b), &body_a).text, "No");
    }

    #[test]
    fn uniform_is_exactly_half() {
        let registry = MockRegistry::new();
        let p = render_prompt(
            PromptKind::EssayMatch,
            &PromptSlots {
                essay: Some("a ."),
                feedback: Some("whatever"),
                ..Default::default()
            },
        )
        .unwrap();
        let out = mock_chat(MockKind::Uniform, &registry, &req(p)).unwrap();
        let top = out.top_logprobs.unwrap();
        let p_yes: f64 = top
            .iter()
            .filter(|(t, _)| t == "Yes")
            .map(|(_, lp)| lp.exp())
            .sum();
        assert!((p_yes - 0.5).abs() < 1e-12);
    }

    #[test]
    fn calibrated_decays_with_rate_distance() {
        let registry = MockRegistry::new();
        let rates: Vec<Rate> = [0.0, 25.0, 50.0, 75.0, 100.0]
            .iter()
            .map(|&p| Rate::from_percent(p).unwrap())
            .collect();
        let texts: Vec<String> = rates.iter().map(|r| format!("essay at {} .", r.label())).collect();
        for (r, t) in rates.iter().zip(&texts) {
            registry.register_version("e", *r, t, &[]);
        }
        let feedback = format!("Dear learner, mock:{} noted.", digest16(&texts[2]));
        let p_at = |probed: usize| {
            let p = render_prompt(
                PromptKind::EssayMatch,
                &PromptSlots {
                    essay: Some(&texts[probed]),
                    feedback: Some(&feedback),
                    ..Default::default()
                },
            )
            .unwrap();
            let out = mock_chat(MockKind::Calibrated, &registry, &req(p)).unwrap();
            out.top_logprobs
                .unwrap()
                .iter()
                .filter(|(t, _)| t == "Yes")
                .map(|(_, lp)| lp.exp())
                .sum::<f64>()
        };
        let curve: Vec<f64> = (0..5).map(p_at).collect();
        assert!(curve[2] > curve[1] && curve[2] > curve[3]);
        assert!(curve[1] > curve[0] && curve[3] > curve[4]);
    }

    #[test]
    fn echo_is_deterministic_and_logprob_free() {
        let registry = MockRegistry::new();
        let a = mock_chat(MockKind::Echo, &registry, &req("hi".into())).unwrap();
        let b = mock_chat(MockKind::Echo, &registry, &req("hi".into())).unwrap();
        assert_eq!(a, b);
        assert!(a.top_logprobs.is_none());
        assert!(a.text.starts_with("echo:"));
    }
}
