//! Market records, feature encoding, scaling and moving-window datasets.

mod features;
mod record;
mod window;

pub use features::{
    calendar_index, encode_calendar, encode_record, CalendarIndex, FeatureScalers, MinMaxScaler,
    FEATURE_DIM, HOURS, LOAD_FEATURE, MONTHS, PRICE_FEATURE, TEMPERATURE_FEATURE, WEEKDAYS,
};
pub use record::{
    format_timestamp, load_csv, parse_timestamp, read_csv, save_csv, write_csv, MarketRecord,
    TIMESTAMP_FORMAT,
};
pub use window::{
    admissible_targets, build_windows, prepare_dataset, split_dataset, split_indices, split_sizes,
    Horizon, PreparedData, SplitConfig, WindowSpec, WindowedSample, MAX_WINDOW,
};
