/// Embedding share of a model's parameter count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamFraction {
    pub embed_params: u64,
    pub total: u64,
    pub fraction: f64,
}

/// `V·d` embedding parameters when tied, `2·V·d` when untied, on top of
/// `other_params` non-embedding parameters.
pub fn param_fraction(vocab: u64, hidden: u64, other_params: u64, tied: bool) -> ParamFraction {
    let per_matrix = vocab * hidden;
    let embed_params = if tied { per_matrix } else { 2 * per_matrix };
    let total = other_params + embed_params;
    ParamFraction {
        embed_params,
        total,
        fraction: if total == 0 { 0.0 } else { embed_params as f64 / total as f64 },
    }
}
