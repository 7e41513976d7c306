//! Clause-level crossover between templates.

use rand::Rng;

use super::{check_template_invariants, Provenance, Template, TemplatePool};
use crate::ast::{ClauseKind, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CrossoverError {
    #[error("{0} is not a crossover clause")]
    UnsupportedClause(ClauseKind),
    #[error("both parents need a top-level {0} clause")]
    NoCommonClause(ClauseKind),
    #[error("offspring rejected: {0}")]
    InvalidOffspring(String),
}

/// Returns `a` with its top-level `clause` subtree replaced by `b`'s.
pub fn crossover(a: &Template, b: &Template, clause: ClauseKind) -> Result<Template, CrossoverError> {
    if !ClauseKind::CROSSOVER.contains(&clause) {
        return Err(CrossoverError::UnsupportedClause(clause));
    }
    let donor = b.skeleton.clause(clause).ok_or(CrossoverError::NoCommonClause(clause))?.clone();
    let mut skeleton = a.skeleton.clone();
    let crate::ast::Node::Branch(root) = &mut skeleton else {
        return Err(CrossoverError::NoCommonClause(clause));
    };
    let slot = root
        .children
        .iter_mut()
        .find(|c| c.kind() == Some(NodeKind::Clause(clause)))
        .ok_or(CrossoverError::NoCommonClause(clause))?;
    *slot = donor;
    check_template_invariants(&skeleton).map_err(CrossoverError::InvalidOffspring)?;
    Ok(Template::from_skeleton(skeleton, Provenance::Crossover { parents: [a.id.clone(), b.id.clone()], clause }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CrossoverStats {
    /// Crossovers actually performed (pairs that shared a clause kind).
    pub attempted: usize,
    /// Offspring rejected by the template invariants.
    pub discarded: usize,
    /// Valid offspring whose id was already known.
    pub duplicates: usize,
    /// Valid offspring with a new id.
    pub novel: usize,
    /// Drawn pairs with no crossover clause in common.
    pub skipped_pairs: usize,
}

/// Performs `count` crossovers over uniformly drawn parent pairs from `pool`,
/// picking the clause kind uniformly among those both parents have. Pairs
/// without a common clause are redrawn and counted in `skipped_pairs`.
/// Returns every valid offspring in draw order.
pub fn random_crossovers<R: Rng>(pool: &TemplatePool, count: usize, rng: &mut R) -> (Vec<Template>, CrossoverStats) {
    let mut stats = CrossoverStats::default();
    let mut offspring = Vec::new();
    let parents: Vec<&Template> = pool.iter().collect();
    if parents.is_empty() {
        return (offspring, stats);
    }
    let max_draws = count.saturating_mul(50) + 1000;
    let mut seen: std::collections::HashSet<String> = parents.iter().map(|t| t.id.clone()).collect();
    let mut draws = 0;
    while stats.attempted < count && draws < max_draws {
        draws += 1;
        let a = parents[rng.gen_range(0..parents.len())];
        let b = parents[rng.gen_range(0..parents.len())];
        let common: Vec<ClauseKind> =
            ClauseKind::CROSSOVER.into_iter().filter(|k| a.has_clause(*k) && b.has_clause(*k)).collect();
        if common.is_empty() {
            stats.skipped_pairs += 1;
            continue;
        }
        let kind = common[rng.gen_range(0..common.len())];
        stats.attempted += 1;
        match crossover(a, b, kind) {
            Ok(child) => {
                if seen.insert(child.id.clone()) {
                    stats.novel += 1;
                } else {
                    stats.duplicates += 1;
                }
                offspring.push(child);
            }
            Err(_) => stats.discarded += 1,
        }
    }
    (offspring, stats)
}
