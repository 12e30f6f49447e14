//! Server-side ladder subset selection and the bandwidth context service.

mod choice;
mod forecast;
mod select;

pub use choice::{estimate_p, estimate_p_inductive, LadderChoiceModel};
pub use forecast::{forecast, read_series_csv, rolling_mae, Forecast, ForecastMethod, ForecastModel};
pub use select::{
    default_replace_cost, deliver_cost, greedy_delivery, optimal_delivery, DeliveryDecision,
    DeliveryProblem, EXACT_LADDER_CAP,
};
