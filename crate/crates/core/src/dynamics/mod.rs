//! Rolling-window forecasting and the monthly screens.

pub mod arima;
pub mod correlate;
pub mod forest;
pub mod stepwise;
pub mod window;

pub use arima::{arima_fit, arima_forecast_one, ArimaFit};
pub use correlate::{monthly_correlations, CorrelationTable};
pub use forest::{rf_relative_rank, ForestConfig};
pub use stepwise::{stepwise_ols, Criterion, StepwiseResult};
pub use window::{dynamic_elastic_net, rolling_arima, run_window, DynResult, WindowConfig, WindowFit, LAG_NAME};
