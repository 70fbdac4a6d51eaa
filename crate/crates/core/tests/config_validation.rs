use molchan::config::ExperimentConfig;
use molchan::Error;

fn config_error(text: &str) -> (usize, String) {
    match ExperimentConfig::parse(text) {
        Err(Error::Config { line, message, .. }) => (line, message),
        other => panic!("expected a config error, got {other:?}"),
    }
}

fn guard(text: &str) -> (usize, &'static str) {
    match ExperimentConfig::parse(text) {
        Err(Error::ConfigGuard { line, guard, .. }) => (line, guard),
        other => panic!("expected a guard, got {other:?}"),
    }
}

#[test]
fn reference_configs_parse() {
    for name in ["reference.toml", "identity.toml"] {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
        let cfg = ExperimentConfig::parse(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(cfg.alphabet(), 2);
    }
}

#[test]
fn syntax_and_type_errors_carry_positions() {
    assert_eq!(config_error("seed = 1\n[fpt]\ndrift = \n").0, 3);
    assert_eq!(config_error("seed = 1\n[schedule]\nkind = \"sometimes\"\n").0, 3);
    assert_eq!(config_error("seed = \"one\"\n").0, 1);
    let (line, msg) = config_error("seed = 1\n[channel]\n\nalphabet = 1\n");
    assert_eq!(line, 4);
    assert!(msg.contains("alphabet"), "{msg}");
}

#[test]
fn guards_point_at_the_block_length() {
    assert_eq!(guard("seed = 1\n[adima]\nn = 17\n"), (3, "output blocks"));
    assert_eq!(guard("seed = 1\n[coding]\nn_values = [8, 20]\n"), (3, "output blocks"));
    assert_eq!(guard("seed = 1\n[receiver]\nkind = \"identity\"\n[channel]\nkind = \"receiver\"\nalphabet = 3\nn = 8\n"), (7, "matrix rows"));
    assert_eq!(guard("seed = 1\n[source_channel]\nletter = [0.5, 0.5]\nn = 17\n"), (4, "output blocks"));
}

#[test]
fn ranges_are_checked() {
    for bad in [
        "seed = 1\n[adima]\nlevel = 1.5\n",
        "seed = 1\n[adima]\npairs = 3\n",
        "seed = 1\n[capacity]\nlambdas = [0.0]\n",
        "seed = 1\n[capacity]\nsource = [1.0]\n",
        "seed = 1\n[coding]\ntrials = 10\n",
        "seed = 1\n[mixing]\nfirst = { kind = \"cylinder\", start = 0, symbols = [2] }\n",
        "seed = 1\n[mixing]\nfirst = { kind = \"cylinder\", start = 0, symbols = [0, 1, 0, 1] }\n",
        "seed = 1\n[source_channel]\nletter = [0.5, 0.6]\n",
        "seed = 1\n[source_channel]\nperiod = 0.0\n",
        "seed = 1\n[receiver]\nkind = \"bsc\"\ncrossover = 1.5\n",
        "seed = 1\n[fpt]\ndiff_coeff = -1.0\n",
    ] {
        assert!(matches!(ExperimentConfig::parse(bad), Err(Error::Config { .. })), "{bad}");
    }
}

#[test]
fn source_channel_uses_its_own_alphabet() {
    let text = "seed = 1\n[source_channel]\nletter = [0.2, 0.3, 0.5]\nn = 4\nreceiver = { kind = \"identity\" }\n";
    let cfg = ExperimentConfig::parse(text).unwrap();
    assert_eq!(cfg.source_channel.letter.len(), 3);
    assert_eq!(cfg.alphabet(), 2);
}
