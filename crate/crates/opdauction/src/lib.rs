//! Stage I pre-auction: member determination, contract pricing and
//! overbooking-rate optimization.

pub mod member;
pub mod optimize;
pub mod pricing;

pub use member::{member_determination, Matching, SortedLists};
pub use optimize::{
    choose, evaluate_lambda, overbooking_opt, overbooking_opt_with, run_stage1, search_params, select, RiskToggles,
    Stage1Outcome,
};
pub use pricing::{buyer_is_member, contract_pricing, seller_is_matched, shifted_bids, SearchParams};
