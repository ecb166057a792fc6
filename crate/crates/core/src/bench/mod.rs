pub mod campaign;
pub mod metrics;
pub mod ranking;

pub use campaign::{
    load_results, read_records, run_campaign, run_campaign_with, BenchmarkRecord, CampaignConfig, CampaignHeader,
    CampaignOutcome, RecordKey, ReferenceSource, ReferenceValue, HEADER_FILE, RECORDS_FILE, TIMINGS_FILE,
};
pub use metrics::{noise_tolerance, rmse, rrie};
pub use ranking::{rank_heats, summarize, write_summary, Heat, HeatRanking, Metric, RankBin, SummaryFormat, SummaryRow};
