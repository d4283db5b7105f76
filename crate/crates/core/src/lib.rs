//! Two-hop UAV-assisted edge computing simulator with age-of-information
//! objectives and multi-agent reinforcement-learning controllers.

pub mod age;
pub mod baselines;
pub mod bench;
pub mod compute;
pub mod env;
pub mod fedavg;
pub mod kinematics;
pub mod learn;
pub mod radio;
pub mod scenario;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenario.md")]
    mod scenario {}
    #[doc = include_str!("../../../book/src/radio.md")]
    mod radio {}
    #[doc = include_str!("../../../book/src/ages.md")]
    mod ages {}
    #[doc = include_str!("../../../book/src/environment.md")]
    mod environment {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/federated.md")]
    mod federated {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
