use serde::{Deserialize, Serialize};

use super::Mode;
use crate::error::{Error, Result};

/// Bumped whenever template wording changes.
pub const TEMPLATE_VERSION: &str = "prompt-templates/1";

/// One in-context example: agnostic caption and its in-domain counterpart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplePair {
    pub agnostic: String,
    pub in_domain: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub mode: Mode,
    pub domain: String,
    pub pairs: Vec<ExamplePair>,
    pub query: String,
    pub text: String,
}

fn clean(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn non_empty(what: &str, s: &str) -> Result<()> {
    if s.trim().is_empty() {
        Err(Error::invalid(format!("{what} is empty")))
    } else {
        Ok(())
    }
}

/// Renders the in-context prompt; pairs appear in the given order.
pub fn build_icl_prompt(mode: Mode, pairs: &[ExamplePair], query: &str, domain: &str) -> Result<PromptBundle> {
    if pairs.is_empty() {
        return Err(Error::invalid("in-context prompt needs at least one example pair"));
    }
    non_empty("domain", domain)?;
    non_empty("query caption", query)?;
    let pairs: Vec<ExamplePair> = pairs
        .iter()
        .map(|p| {
            non_empty("example caption", &p.agnostic)?;
            non_empty("example caption", &p.in_domain)?;
            Ok(ExamplePair {
                agnostic: clean(&p.agnostic),
                in_domain: clean(&p.in_domain),
            })
        })
        .collect::<Result<_>>()?;
    let (domain, query) = (clean(domain), clean(query));
    let mut text = format!(
        "You translate generic time-series descriptions into descriptions for the domain: {domain}.\n"
    );
    for p in &pairs {
        text.push_str(&format!("Generic: {}\nIn-domain: {}\n", p.agnostic, p.in_domain));
    }
    text.push_str(&format!("Generic: {query}\nIn-domain:"));
    Ok(PromptBundle {
        mode,
        domain,
        pairs,
        query,
        text,
    })
}

pub fn build_zs_prompt(query: &str, domain: &str) -> Result<PromptBundle> {
    non_empty("domain", domain)?;
    non_empty("query caption", query)?;
    let (domain, query) = (clean(domain), clean(query));
    let text = format!("Translate the time-series description '{query}' in the context of {domain}.");
    Ok(PromptBundle {
        mode: Mode::Zs,
        domain,
        pairs: Vec::new(),
        query,
        text,
    })
}

pub fn multimodal_instruction(domain: &str) -> Result<String> {
    non_empty("domain", domain)?;
    Ok(format!("Describe the time-series in the context of {}.", clean(domain)))
}
