use std::collections::BTreeMap;

use fieldnorm_core::corpus::{
    assemble_corpus, validate_corpus, AuthorshipRow, Corpus, LoadOptions, Numbered, Publication,
    PublicationRow, RawSources, Researcher, ResearcherRow, SdEntry, Sector, Taxonomy, TaxonomyRow,
};
use fieldnorm_core::indicators::{intensity_table, CountingMode, FieldNormalizer, Scope};
use fieldnorm_core::ranking::{
    compare_rankings, distortion_report, rank_units, RankComparison, Ranking,
};
use fieldnorm_core::synth::{generate_corpus, Noise, SynthConfig, SynthSd, SynthUnit};
use proptest::prelude::*;

/// Random corpus: researchers spread over units and disciplines, each
/// publication co-authored by researchers of its own discipline.
fn random_corpus() -> impl Strategy<Value = Corpus> {
    (
        proptest::collection::vec((0usize..4, 0usize..3), 1..30),
        proptest::collection::vec(
            (
                0usize..3,
                proptest::collection::vec(any::<prop::sample::Index>(), 1..4),
                0u64..20,
            ),
            0..40,
        ),
    )
        .prop_map(|(people, pubs)| {
            let taxonomy = Taxonomy::new(
                (0..3)
                    .map(|s| SdEntry {
                        sd_id: format!("S{s}"),
                        sd_name: format!("S{s}"),
                        da_id: if s < 2 { "D1".into() } else { "D2".into() },
                        da_name: "area".into(),
                    })
                    .collect(),
            );
            let researchers: Vec<Researcher> = people
                .iter()
                .enumerate()
                .map(|(i, (u, s))| Researcher {
                    researcher_id: format!("r{i}"),
                    unit_id: format!("U{u}"),
                    sd_id: format!("S{s}"),
                    sector: Sector::Public,
                })
                .collect();
            let mut publications = Vec::new();
            for (j, (s, picks, cites)) in pubs.into_iter().enumerate() {
                let sd = format!("S{s}");
                let pool: Vec<&Researcher> = researchers.iter().filter(|r| r.sd_id == sd).collect();
                if pool.is_empty() {
                    continue;
                }
                publications.push(Publication {
                    pub_id: format!("p{j}"),
                    year: 2001 + (j % 3) as i32,
                    sd_id: sd,
                    citations: cites,
                    author_links: picks
                        .iter()
                        .map(|ix| ix.get(&pool).researcher_id.clone())
                        .collect(),
                });
            }
            Corpus::from_parts(taxonomy, researchers, publications)
        })
}

fn scale_sd(corpus: &Corpus, sd_id: &str, factor: u32) -> Corpus {
    let mut pubs = Vec::new();
    for p in corpus.publications() {
        if p.sd_id == sd_id {
            for k in 0..factor {
                let mut q = p.clone();
                q.pub_id = format!("{}#{k}", p.pub_id);
                pubs.push(q);
            }
        } else {
            pubs.push(p.clone());
        }
    }
    Corpus::from_parts(corpus.taxonomy.clone(), corpus.researchers().to_vec(), pubs)
}

fn staff_weighted_pqcn(corpus: &Corpus, mode: CountingMode, sd: &str) -> Option<f64> {
    let n = FieldNormalizer::new(corpus, mode);
    let mut num = 0.0;
    let mut den = 0.0;
    for unit in n.units_in_sd(sd) {
        let staff = n.staff(unit, sd) as f64;
        num += n.pqcn(unit, sd).ok()? * staff;
        den += staff;
    }
    (den > 0.0).then(|| num / den)
}

/// Independent rank-variation statistics: positions found by linear scan.
fn brute_force_comparison(first: &[String], second: &[String]) -> RankComparison {
    let mut variations = Vec::new();
    for unit in first {
        let p1 = first.iter().position(|u| u == unit).unwrap();
        let p2 = second.iter().position(|u| u == unit).unwrap();
        variations.push(p1.abs_diff(p2));
    }
    let mut changed: Vec<usize> = variations.iter().copied().filter(|v| *v > 0).collect();
    changed.sort();
    let n = changed.len();
    let (avg, med) = if n == 0 {
        (0.0, 0.0)
    } else if n % 2 == 1 {
        (
            changed.iter().sum::<usize>() as f64 / n as f64,
            changed[n / 2] as f64,
        )
    } else {
        (
            changed.iter().sum::<usize>() as f64 / n as f64,
            (changed[n / 2 - 1] + changed[n / 2]) as f64 / 2.0,
        )
    };
    RankComparison {
        n_units: first.len(),
        n_changed: n,
        max_variation: changed.last().copied().unwrap_or(0),
        average_variation: avg,
        median_variation: med,
    }
}

fn ranking_of(order: &[String]) -> Ranking {
    let n = order.len();
    let values: BTreeMap<String, f64> = order
        .iter()
        .enumerate()
        .map(|(i, u)| (u.clone(), (n - i) as f64))
        .collect();
    rank_units(&values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalization_is_neutral(corpus in random_corpus()) {
        for mode in [CountingMode::Whole, CountingMode::Fractional, CountingMode::QualityWeighted] {
            for e in corpus.taxonomy.entries() {
                if let Some(mean) = staff_weighted_pqcn(&corpus, mode, &e.sd_id) {
                    prop_assert!((mean - 1.0).abs() < 1e-12, "{mode} {} {mean}", e.sd_id);
                }
            }
        }
    }

    #[test]
    fn theta_invariant_under_fertility_scaling(corpus in random_corpus(), factor in 2u32..6) {
        let scaled = scale_sd(&corpus, "S0", factor);
        let before = FieldNormalizer::new(&corpus, CountingMode::Whole);
        let after = FieldNormalizer::new(&scaled, CountingMode::Whole);
        for da in ["D1", "D2"] {
            for unit in before.units_in_area(da) {
                match (before.theta(unit, da), after.theta(unit, da)) {
                    (Ok(a), Ok(b)) => prop_assert!((a.theta - b.theta).abs() < 1e-9),
                    (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
                }
            }
        }
    }

    #[test]
    fn counting_totals_conserve(corpus in random_corpus()) {
        let whole = intensity_table(&corpus, Scope::Sd, CountingMode::Whole);
        let frac = intensity_table(&corpus, Scope::Sd, CountingMode::Fractional);
        for e in corpus.taxonomy.entries() {
            let distinct = corpus.publications().iter().filter(|p| p.sd_id == e.sd_id).count() as f64;
            let spans_units = corpus.publications().iter().filter(|p| p.sd_id == e.sd_id).any(|p| {
                let units: std::collections::BTreeSet<_> = p.author_links.iter()
                    .map(|a| &corpus.researcher(a).unwrap().unit_id).collect();
                units.len() > 1
            });
            let w: f64 = whole.scope_cells(&e.sd_id).map(|c| c.publication_count).sum();
            let f: f64 = frac.scope_cells(&e.sd_id).map(|c| c.publication_count).sum();
            prop_assert!(w >= distinct);
            if !spans_units {
                prop_assert_eq!(w, distinct);
            }
            prop_assert!((f - distinct).abs() < 1e-9);
        }
        for c in whole.cells.iter().chain(&frac.cells) {
            prop_assert!(c.researcher_count > 0);
            prop_assert_eq!(c.intensity, c.publication_count / c.researcher_count as f64);
        }
    }

    #[test]
    fn ingestion_ignores_row_order(seed in any::<u64>()) {
        let corpus = generate_corpus(&small_config(seed)).unwrap();
        let mut sources = to_rows(&corpus);
        let baseline = assemble_corpus(sources.clone(), &LoadOptions::default()).unwrap();
        let mut rng = fieldnorm_core::synth::SplitMix64::new(seed);
        shuffle(&mut sources.taxonomy, &mut rng);
        shuffle(&mut sources.researchers, &mut rng);
        shuffle(&mut sources.publications, &mut rng);
        shuffle(&mut sources.authorships, &mut rng);
        let shuffled = assemble_corpus(sources, &LoadOptions::default()).unwrap();
        prop_assert_eq!(&baseline, &shuffled);
        prop_assert_eq!(baseline.publications(), corpus.publications());
    }

    #[test]
    fn synthetic_corpora_validate(seed in any::<u64>()) {
        let corpus = generate_corpus(&small_config(seed)).unwrap();
        prop_assert!(validate_corpus(&corpus).is_accepted());
    }

    #[test]
    fn uniform_fertility_has_no_distortion(
        staff in proptest::collection::vec(0u64..8, 12),
        quarters in 1u32..12,
    ) {
        // staff in multiples of 4 and fertility in quarters keep every
        // expected count integral, so rounding cannot break the symmetry
        let fert = quarters as f64 / 4.0;
        let config = SynthConfig {
            seed: 0,
            sds: vec![SynthSd::new("A", "D", fert), SynthSd::new("B", "D", fert), SynthSd::new("C", "D", fert)],
            units: staff.chunks(3).enumerate().map(|(i, s)| SynthUnit::new(
                &format!("U{i}"), &[("A", 4 * s[0]), ("B", 4 * s[1]), ("C", 4 * s[2])])).collect(),
            noise: Noise::None,
            citations_per_publication: 0.0,
            period: (2001, 2003),
        };
        prop_assume!(staff.chunks(3).filter(|s| s.iter().sum::<u64>() > 0).count() >= 2);
        let corpus = generate_corpus(&config).unwrap();
        let report = distortion_report(&corpus, "D", CountingMode::Whole).unwrap();
        prop_assert_eq!(report.comparison.n_changed, 0);
        prop_assert_eq!(report.comparison.max_variation, 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn comparison_matches_brute_force(
        (first, second) in (1usize..=8).prop_flat_map(|n| {
            let ids: Vec<String> = (0..n).map(|i| format!("u{i}")).collect();
            (Just(ids.clone()).prop_shuffle(), Just(ids).prop_shuffle())
        })
    ) {
        let got = compare_rankings(&ranking_of(&first), &ranking_of(&second)).unwrap();
        prop_assert_eq!(got, brute_force_comparison(&first, &second));
    }
}

fn small_config(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        sds: vec![
            SynthSd::new("S1", "D", 0.4),
            SynthSd::new("S2", "D", 1.3),
            SynthSd::new("S3", "E", 0.8),
        ],
        units: vec![
            SynthUnit::new("U1", &[("S1", 4), ("S2", 2), ("S3", 1)]),
            SynthUnit::new("U2", &[("S1", 1), ("S2", 6)]),
            SynthUnit::new("U3", &[("S3", 5)]),
        ],
        noise: Noise::Poisson,
        citations_per_publication: 3.0,
        period: (2001, 2003),
    }
}

fn to_rows(corpus: &Corpus) -> RawSources {
    let mut src = RawSources::default();
    for (i, e) in corpus.taxonomy.entries().iter().enumerate() {
        src.taxonomy.push(Numbered::new(
            i + 2,
            TaxonomyRow {
                sd_id: e.sd_id.clone(),
                sd_name: e.sd_name.clone(),
                da_id: e.da_id.clone(),
                da_name: e.da_name.clone(),
            },
        ));
    }
    for (i, r) in corpus.researchers().iter().enumerate() {
        src.researchers.push(Numbered::new(
            i + 2,
            ResearcherRow {
                researcher_id: r.researcher_id.clone(),
                unit_id: r.unit_id.clone(),
                sd_id: r.sd_id.clone(),
                sector: Some(r.sector),
            },
        ));
    }
    for (i, p) in corpus.publications().iter().enumerate() {
        src.publications.push(Numbered::new(
            i + 2,
            PublicationRow {
                pub_id: p.pub_id.clone(),
                year: p.year,
                // leave every other discipline to the majority rule
                sd_id: (i % 2 == 0).then(|| p.sd_id.clone()),
                citations: p.citations,
            },
        ));
        for a in &p.author_links {
            src.authorships.push(Numbered::new(
                src.authorships.len() + 2,
                AuthorshipRow {
                    pub_id: p.pub_id.clone(),
                    researcher_id: a.clone(),
                },
            ));
        }
    }
    src
}

fn shuffle<T>(items: &mut [T], rng: &mut fieldnorm_core::synth::SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}
