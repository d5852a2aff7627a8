//! Downstream use of distance matrices: leave-one-out KNN classification and
//! regression of transfer gains on dataset distance.

mod knn;
mod transfer;

pub use knn::{knn_loocv, KnnResult, LabeledMatrix};
pub use transfer::{
    format_report_csv, ols_fit, read_transfer_records, transfer_report, transferability, GroupFit, OlsFit,
    TransferRecord, TransferReport, TransferRow, ALL_GROUP,
};
