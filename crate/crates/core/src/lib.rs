//! Transition-based recognition of discontinuous and overlapping entity
//! mentions.
//!
//! * [`corpus`]: sentences, mentions, file formats, statistics, transforms.
//! * [`transitions`]: the six-action state machine, its static oracle and traces.
//! * [`schemas`]: BIO and BIO-extension tag codecs for baseline taggers.
//! * [`neural`]: the Stack-LSTM scorer with buffer attention, trained by SGD.
//! * [`eval`]: strict-match scoring and breakdowns by overlap and length.

pub mod corpus;
pub mod eval;
pub mod neural;
pub mod schemas;
pub mod transitions;
