//! The troubleshooting corpus shipped with the crate.

macro_rules! corpus_file {
    ($path:literal) => {
        ($path, include_str!(concat!("../../corpus/", $path)))
    };
}

pub const DOCUMENTS: &[(&str, &str)] = &[
    corpus_file!("power/input_power_failure_procedure.txt"),
    corpus_file!("power/energy_meter_counters.txt"),
    corpus_file!("power/site_power_distribution.txt"),
    corpus_file!("power/battery_backup.txt"),
    corpus_file!("core/pdu_session_degradation_procedure.txt"),
    corpus_file!("core/core_counters.txt"),
    corpus_file!("core/smf_nrf_interaction.txt"),
    corpus_file!("core/amf_registration.txt"),
];

pub const PATTERN_FILES: &[(&str, &str)] = &[
    corpus_file!("power/rca.patterns"),
    corpus_file!("core/rca.patterns"),
];
