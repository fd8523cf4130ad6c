use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mfirank::data::{
    generate_fixture, parse_clicks, parse_conversions, parse_products, validate, write_clicks, write_conversions,
    write_products, Datasets, FixtureConfig, Parsed, RowError, ValidationReport,
};
use mfirank::eval::{
    self, fisher_exact_greater, welch_t_greater, write_daily_csv, yule_ci, yule_colligation, Coverage, DailyPoint,
    Totals, TwoByTwo, VraConfig, WeekList, WeekTotals, WelchResult, YuleCi,
};
use mfirank::features::{feature_table, read_feature_csv, write_feature_csv, FeatureConfig, FeatureTable};
use mfirank::rank::{page_filter, rank, PageRanking, RankConfig, RankEntry, Ranking};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::failure::Failure;

/// Row errors kept in JSON outputs per file.
const ROW_ERROR_EXAMPLES: usize = 20;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config_digest: &'a str,
    #[serde(flatten)]
    body: T,
}

fn write_json<T: Serialize>(config: &PipelineConfig, name: &str, body: T) -> Result<PathBuf, Failure> {
    let digest = config.digest();
    let mut text = serde_json::to_string_pretty(&Envelope { config_digest: &digest, body })?;
    text.push('\n');
    write_file(&config.out, name, text.as_bytes())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::data(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RowErrors {
    pub count: usize,
    pub examples: Vec<RowError>,
}

impl RowErrors {
    fn of<T>(parsed: &Parsed<T>, what: &str) -> Self {
        if !parsed.errors.is_empty() {
            log::warn!("{what}: {} rows skipped", parsed.errors.len());
        }
        RowErrors {
            count: parsed.errors.len(),
            examples: parsed.errors.iter().take(ROW_ERROR_EXAMPLES).cloned().collect(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LoadReport {
    pub conversions: RowErrors,
    pub products: RowErrors,
    pub clicks: RowErrors,
}

/// Parse all configured datasets before anything is written.
fn load(config: &PipelineConfig, need_clicks: bool) -> Result<(Datasets, LoadReport), Failure> {
    let conv_path = config.require(&config.conversions, "conversions")?;
    let prod_path = config.require(&config.products, "products")?;
    let conv = parse_conversions(open(&conv_path)?, &config.schema)
        .map_err(|e| Failure::from(e).context(format!("{}", conv_path.display())))?;
    let prod = parse_products(open(&prod_path)?, &config.schema)
        .map_err(|e| Failure::from(e).context(format!("{}", prod_path.display())))?;
    let clicks = match &config.clicks {
        Some(p) => parse_clicks(open(p)?, &config.schema)
            .map_err(|e| Failure::from(e).context(format!("{}", p.display())))?,
        None if need_clicks => return Err(Failure::usage("no clicks file configured")),
        None => Parsed { records: Vec::new(), errors: Vec::new() },
    };
    let report = LoadReport {
        conversions: RowErrors::of(&conv, "conversions"),
        products: RowErrors::of(&prod, "products"),
        clicks: RowErrors::of(&clicks, "clicks"),
    };
    Ok((Datasets { conversions: conv.records, products: prod.records, clicks: clicks.records }, report))
}

#[derive(Serialize)]
struct ValidateOut {
    report: ValidationReport,
    row_errors: LoadReport,
}

pub fn cmd_validate(config: &PipelineConfig) -> Result<(), Failure> {
    let (data, row_errors) = load(config, false)?;
    let report = validate(&data.conversions, &data.products, &data.clicks);
    println!(
        "{} lenders, {} clients, {} applications, {} sales",
        report.n_mfis, report.n_clients, report.n_applications, report.n_sales
    );
    let path = write_json(config, "validation.json", ValidateOut { report, row_errors })?;
    println!("wrote {}", path.display());
    Ok(())
}

fn feature_config(config: &PipelineConfig, vra: bool) -> FeatureConfig {
    FeatureConfig {
        loan_types: config.loan_types.clone(),
        active: if vra { config.vra_features.clone() } else { config.features.clone() },
        durations: config.durations.clone(),
    }
}

fn rank_config(config: &PipelineConfig) -> RankConfig {
    RankConfig { tie_eps: config.tie_eps, damping: config.damping }
}

#[derive(Serialize)]
struct FeaturesOut {
    #[serde(flatten)]
    table: FeatureTable,
    row_errors: LoadReport,
}

pub fn cmd_features(config: &PipelineConfig) -> Result<(), Failure> {
    let (data, row_errors) = load(config, true)?;
    let table = feature_table(&data, &feature_config(config, false))?;
    let mut csv = Vec::new();
    write_feature_csv(&mut csv, &table.vectors)?;
    let csv_path = write_file(&config.out, "features.csv", &csv)?;
    println!("{} lenders with features, {} excluded", table.vectors.len(), table.excluded.len());
    let json_path = write_json(config, "features.json", FeaturesOut { table, row_errors })?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

#[derive(Serialize)]
struct RankOut<'a> {
    #[serde(flatten)]
    ranking: &'a Ranking,
    ranked: &'a [RankEntry],
    page: Option<PageRanking>,
}

pub fn cmd_rank(config: &PipelineConfig, input: Option<&Path>) -> Result<(), Failure> {
    let input = input.map(Path::to_path_buf).unwrap_or_else(|| config.out.join("features.csv"));
    let vectors = read_feature_csv(open(&input)?).map_err(|e| Failure::from(e).context(format!("{}", input.display())))?;
    let ranking = rank(&vectors, &config.features, &rank_config(config))?;
    let page = if config.page_constraints.is_empty() {
        None
    } else {
        let prod_path = config.require(&config.products, "products (needed by page constraints)")?;
        let products = parse_products(open(&prod_path)?, &config.schema)?.records;
        Some(page_filter(&ranking.order(), &products, &config.page_constraints)?)
    };

    let mut pi_csv = Vec::new();
    {
        let mut w = BufWriter::new(&mut pi_csv);
        writeln!(w, "position,mfi_id,pi")?;
        for e in &ranking.entries {
            writeln!(w, "{},{},{}", e.position, csv_field(e.mfi_id.as_str()), e.pi)?;
        }
    }
    let pi_path = write_file(&config.out, "pi.csv", &pi_csv)?;
    let order: Vec<&str> = ranking.entries.iter().map(|e| e.mfi_id.as_str()).collect();
    println!("{}", order.join(" > "));
    if !ranking.stationary.power_converged {
        log::warn!("power iteration did not converge; the direct solution is reported");
    }
    let out = RankOut { ranking: &ranking, ranked: &ranking.entries, page };
    let json_path = write_json(config, "rank.json", out)?;
    println!("wrote {} and {}", json_path.display(), pi_path.display());
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize, Deserialize)]
struct EvaluationOut {
    vra_features: String,
    min_support: u64,
    weekly_lists: Vec<WeekList>,
    weekly_totals: Vec<WeekTotals>,
    total: Totals,
    coverage: Coverage,
    reapproval_fallback_share: f64,
    warnings: Vec<String>,
    daily: Vec<DailyPoint>,
}

pub fn cmd_evaluate(config: &PipelineConfig) -> Result<(), Failure> {
    let (data, _) = load(config, true)?;
    let vra = VraConfig { features: feature_config(config, true), rank: rank_config(config) };
    let e = eval::evaluate(&data, &vra, config.min_support)?;
    let t = &e.simulation.total;
    if t.historical_lar == t.lar && e.simulation.coverage.copied == e.simulation.coverage.simulated {
        log::info!("the ranking under evaluation reproduces history");
    }
    println!(
        "approval rate {:.4} (historical {:.4}), income per application {:.4} (historical {:.4}), {} of {} applications simulated",
        t.lar,
        t.historical_lar,
        t.avg_income,
        t.historical_avg_income,
        e.simulation.coverage.simulated,
        e.simulation.coverage.applications
    );
    let mut csv = Vec::new();
    write_daily_csv(&mut csv, &e.daily)?;
    let csv_path = write_file(&config.out, "daily.csv", &csv)?;
    let out = EvaluationOut {
        vra_features: config.vra_features.to_string(),
        min_support: e.min_support,
        weekly_lists: e.schedule,
        weekly_totals: e.simulation.weekly,
        total: e.simulation.total,
        coverage: e.simulation.coverage,
        reapproval_fallback_share: e.reapproval_fallback_share,
        warnings: e.warnings,
        daily: e.daily,
    };
    let json_path = write_json(config, "evaluation.json", out)?;
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    Ok(())
}

#[derive(Deserialize)]
struct DailyOnly {
    daily: Vec<DailyPoint>,
}

pub fn cmd_report(config: &PipelineConfig, input: Option<&Path>) -> Result<(), Failure> {
    let input = input.map(Path::to_path_buf).unwrap_or_else(|| config.out.join("evaluation.json"));
    let text = fs::read_to_string(&input)
        .map_err(|e| Failure::data(format!("no evaluation output at {}: {e}", input.display())))?;
    let parsed: DailyOnly = serde_json::from_str(&text)
        .map_err(|e| Failure::data(format!("{} is not an evaluation output: {e}", input.display())))?;
    let mut csv = Vec::new();
    write_daily_csv(&mut csv, &parsed.daily)?;
    let path = write_file(&config.out, "report.csv", &csv)?;
    println!("wrote {} ({} rows)", path.display(), parsed.daily.len());
    Ok(())
}

#[derive(Serialize)]
#[serde(tag = "test", rename_all = "snake_case")]
enum AbRow {
    Fisher { group1: Counts, group2: Counts, rate1: f64, rate2: f64, p: f64 },
    Welch { sample1: String, sample2: String, n1: usize, n2: usize, #[serde(flatten)] result: WelchResult },
    Yule { table: TwoByTwo, y: Option<f64>, ci: YuleCi },
}

#[derive(Serialize)]
struct Counts {
    successes: u64,
    trials: u64,
}

pub struct AbArgs<'a> {
    pub fisher: &'a [u64],
    pub welch: &'a [PathBuf],
    pub yule: &'a [u64],
    pub level: f64,
}

fn read_sample(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .flat_map(|l| l.split([',', ' ', '\t', ';']).filter(|s| !s.is_empty()).map(str::to_owned).collect::<Vec<_>>())
        .map(|s| s.parse::<f64>().map_err(|_| Failure::data(format!("{}: not a number: {s:?}", path.display()))))
        .collect()
}

pub fn cmd_abtest(config: &PipelineConfig, args: &AbArgs) -> Result<(), Failure> {
    if args.fisher.is_empty() && args.welch.is_empty() && args.yule.is_empty() {
        return Err(Failure::usage("abtest needs --fisher, --welch or --yule"));
    }
    let mut rows = Vec::new();
    for g in args.fisher.chunks(4) {
        let &[s1, n1, s2, n2] = g else { return Err(Failure::usage("--fisher takes 4 counts")) };
        let p = fisher_exact_greater((s1, n1), (s2, n2))?;
        rows.push(AbRow::Fisher {
            group1: Counts { successes: s1, trials: n1 },
            group2: Counts { successes: s2, trials: n2 },
            rate1: s1 as f64 / n1 as f64,
            rate2: s2 as f64 / n2 as f64,
            p,
        });
    }
    for pair in args.welch.chunks(2) {
        let [a, b] = pair else { return Err(Failure::usage("--welch takes 2 sample files")) };
        let (x, y) = (read_sample(a)?, read_sample(b)?);
        let result = welch_t_greater(&x, &y)?;
        rows.push(AbRow::Welch {
            sample1: a.display().to_string(),
            sample2: b.display().to_string(),
            n1: x.len(),
            n2: y.len(),
            result,
        });
    }
    for g in args.yule.chunks(4) {
        let &[n11, n10, n01, n00] = g else { return Err(Failure::usage("--yule takes 4 counts")) };
        let table = TwoByTwo::new(n11, n10, n01, n00);
        rows.push(AbRow::Yule { table, y: yule_colligation(&table).ok(), ci: yule_ci(&table, args.level)? });
    }
    let digest = config.digest();
    let text = serde_json::to_string_pretty(&Envelope { config_digest: &digest, body: AbBody { rows: &rows } })?;
    println!("{text}");
    write_file(&config.out, "abtest.json", format!("{text}\n").as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct AbBody<'a> {
    rows: &'a [AbRow],
}

pub struct FixtureArgs {
    pub seed: u64,
    pub mfis: usize,
    pub clients: usize,
    pub days: u32,
}

pub fn cmd_fixture(config: &PipelineConfig, args: &FixtureArgs) -> Result<(), Failure> {
    let fixture_config = FixtureConfig { days: args.days, ..FixtureConfig::default() };
    let f = generate_fixture(args.seed, args.mfis, args.clients, &fixture_config)?;
    let mut buf = Vec::new();
    write_conversions(&mut buf, &f.conversions, &config.schema)?;
    write_file(&config.out, "conversions.csv", &buf)?;
    buf.clear();
    write_products(&mut buf, &f.products, &config.schema)?;
    write_file(&config.out, "products.csv", &buf)?;
    buf.clear();
    write_clicks(&mut buf, &f.clicks, &config.schema)?;
    write_file(&config.out, "clicks.csv", &buf)?;
    let pipeline = PipelineConfig {
        conversions: Some("conversions.csv".into()),
        products: Some("products.csv".into()),
        clicks: Some("clicks.csv".into()),
        out: "out".into(),
        ..config.clone()
    };
    let mut text = serde_json::to_string_pretty(&pipeline)?;
    text.push('\n');
    let path = write_file(&config.out, "pipeline.json", text.as_bytes())?;
    println!(
        "{} applications, {} cards, {} clicks; config at {}",
        f.conversions.len(),
        f.products.len(),
        f.clicks.len(),
        path.display()
    );
    Ok(())
}
