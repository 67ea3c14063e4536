use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("trivial word where a nontrivial one is required")]
    TrivialWord,

    #[error("subgroup not preserved by the automorphism")]
    SubgroupNotPreserved,

    #[error("subgroup has infinite index")]
    InfiniteIndex,

    #[error("not a fiber pair: quotient is not inner")]
    NotFiberPair,

    #[error("search budget of {budget} nodes exhausted during {what}")]
    BudgetExhausted { what: String, budget: usize },

    #[error("tension descent failed to certify an optimal map within {0} iterations")]
    TensionBudget(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
