use super::*;
use crate::resolver::ZoneFixture;

/// The primer record and its hosts.
fn primer_zone() -> ZoneFixture {
    ZoneFixture::new()
        .with_txt("example.com", "v=spf1 +mx a:puffin.example.com/28 -all")
        .with_mx("example.com", 10, "mail.example.com")
        .with_a("mail.example.com", "198.51.100.5".parse().unwrap())
        .with_a("puffin.example.com", "192.0.2.16".parse().unwrap())
}

fn session(ip: &str) -> SessionInput {
    SessionInput::new(ip.parse().unwrap(), "user@example.com").unwrap()
}

async fn check(zone: &ZoneFixture, ip: &str, domain: &str) -> CheckOutcome {
    check_host(&session(ip), domain, zone).await
}

#[tokio::test]
async fn primer_mx_pass() {
    let zone = primer_zone();
    let outcome = check(&zone, "198.51.100.5", "example.com").await;
    assert_eq!(outcome.result, SpfResult::Pass);
    assert_eq!(outcome.matched.unwrap().term_index, 0);
}

#[tokio::test]
async fn primer_a_cidr_pass() {
    let zone = primer_zone();
    // 192.0.2.16/28 spans .16 through .31.
    let outcome = check(&zone, "192.0.2.20", "example.com").await;
    assert_eq!(outcome.result, SpfResult::Pass);
    assert_eq!(outcome.matched.unwrap().term_index, 1);

    let outside = check(&zone, "192.0.2.32", "example.com").await;
    assert_eq!(outside.result, SpfResult::Fail);
}

#[tokio::test]
async fn primer_fail_via_all() {
    let zone = primer_zone();
    let outcome = check(&zone, "203.0.113.9", "example.com").await;
    assert_eq!(outcome.result, SpfResult::Fail);
    assert_eq!(outcome.matched.unwrap().term_index, 2);
}

#[tokio::test]
async fn no_match_without_all_is_neutral() {
    let zone = ZoneFixture::new()
        .with_txt("open.test", "v=spf1 mx")
        .with_mx("open.test", 10, "mail.open.test")
        .with_a("mail.open.test", "198.51.100.5".parse().unwrap());
    let outcome = check(&zone, "203.0.113.9", "open.test").await;
    assert_eq!(outcome.result, SpfResult::Neutral);
    assert!(outcome.matched.is_none());
}

#[tokio::test]
async fn missing_record_is_none() {
    let zone = ZoneFixture::new();
    let outcome = check(&zone, "203.0.113.9", "missing.test").await;
    assert_eq!(outcome.result, SpfResult::None);
}

#[tokio::test]
async fn timeout_is_temperror() {
    let zone = ZoneFixture::new().with_error("slow.test", crate::resolver::DnsAnswer::Timeout);
    let outcome = check(&zone, "203.0.113.9", "slow.test").await;
    assert_eq!(outcome.result, SpfResult::TempError);
}

#[tokio::test]
async fn multiple_records_is_permerror() {
    let zone = ZoneFixture::new()
        .with_txt("twice.test", "v=spf1 -all")
        .with_txt("twice.test", "v=spf1 +all");
    let outcome = check(&zone, "203.0.113.9", "twice.test").await;
    assert_eq!(outcome.result, SpfResult::PermError);
    assert_eq!(
        outcome.trace.error,
        Some(ErrorClass::RecordNotFound {
            cause: RecordNotFoundCause::MultipleRecords
        })
    );
}

fn chain_zone(includes: usize) -> ZoneFixture {
    // top.test has `includes` include terms, each target denies everything.
    let mut zone = ZoneFixture::new();
    let mut record = String::from("v=spf1");
    for i in 0..includes {
        record.push_str(&format!(" include:i{i}.test"));
        zone = zone.with_txt(&format!("i{i}.test"), "v=spf1 -all");
    }
    zone.with_txt("top.test", &record)
}

#[tokio::test]
async fn ten_counted_terms_complete() {
    let zone = chain_zone(10);
    let outcome = check(&zone, "203.0.113.9", "top.test").await;
    assert_eq!(outcome.result, SpfResult::Neutral);
    assert_eq!(outcome.trace.lookups_used, 10);
}

#[tokio::test]
async fn eleventh_counted_term_is_permerror() {
    let zone = chain_zone(11);
    let outcome = check(&zone, "203.0.113.9", "top.test").await;
    assert_eq!(outcome.result, SpfResult::PermError);
    assert_eq!(outcome.trace.error, Some(ErrorClass::TooManyLookups));
}

#[tokio::test]
async fn ip_only_record_uses_no_lookups() {
    let zone = ZoneFixture::new().with_txt("ips.test", "v=spf1 ip4:192.0.2.0/24 -all");
    let outcome = check(&zone, "192.0.2.7", "ips.test").await;
    assert_eq!(outcome.result, SpfResult::Pass);
    assert_eq!(outcome.trace.lookups_used, 0);
}

#[tokio::test]
async fn match_within_budget_wins_despite_later_excess() {
    // Two includes, then a matching ip4, then far more counted terms than
    // the budget allows.
    let mut record = String::from("v=spf1 include:i0.test include:i1.test ip4:192.0.2.7");
    for i in 2..20 {
        record.push_str(&format!(" include:i{i}.test"));
    }
    record.push_str(" -all");
    let mut zone = ZoneFixture::new().with_txt("top.test", &record);
    for i in 0..20 {
        zone = zone.with_txt(&format!("i{i}.test"), "v=spf1 -all");
    }
    let outcome = check(&zone, "192.0.2.7", "top.test").await;
    assert_eq!(outcome.result, SpfResult::Pass);
    assert_eq!(outcome.trace.lookups_used, 2);
}

#[tokio::test]
async fn two_void_lookups_complete() {
    let zone = ZoneFixture::new().with_txt("voids.test", "v=spf1 a:gone1.test a:gone2.test -all");
    let outcome = check(&zone, "203.0.113.9", "voids.test").await;
    assert_eq!(outcome.result, SpfResult::Fail);
    assert_eq!(outcome.trace.void_lookups_used, 2);
}

#[tokio::test]
async fn third_void_lookup_is_permerror() {
    let zone = ZoneFixture::new().with_txt(
        "voids.test",
        "v=spf1 a:gone1.test a:gone2.test a:gone3.test -all",
    );
    let outcome = check(&zone, "203.0.113.9", "voids.test").await;
    assert_eq!(outcome.result, SpfResult::PermError);
    assert_eq!(outcome.trace.error, Some(ErrorClass::TooManyVoidLookups));
    assert_eq!(outcome.trace.void_lookups_used, 3);
}

#[tokio::test]
async fn empty_plus_answer_is_not_an_error() {
    let zone = ZoneFixture::new()
        .with_txt("mixed.test", "v=spf1 a:empty.test a:there.test -all")
        .with_error("empty.test", crate::resolver::DnsAnswer::Empty)
        .with_a("there.test", "198.51.100.5".parse().unwrap());
    let outcome = check(&zone, "198.51.100.5", "mixed.test").await;
    assert_eq!(outcome.result, SpfResult::Pass);
    assert_eq!(outcome.trace.void_lookups_used, 1);
}

#[tokio::test]
async fn direct_include_loop() {
    let zone = ZoneFixture::new().with_txt("a.test", "v=spf1 include:a.test -all");
    let outcome = check(&zone, "203.0.113.9", "a.test").await;
    assert_eq!(outcome.result, SpfResult::PermError);
    assert_eq!(
        outcome.trace.error,
        Some(ErrorClass::IncludeLoop { depth: 0 })
    );
}

#[tokio::test]
async fn depth_one_include_loop() {
    let zone = ZoneFixture::new()
        .with_txt("a.test", "v=spf1 include:b.test -all")
        .with_txt("b.test", "v=spf1 include:a.test -all");
    let outcome = check(&zone, "203.0.113.9", "a.test").await;
    assert_eq!(outcome.result, SpfResult::PermError);
    assert_eq!(
        outcome.trace.error,
        Some(ErrorClass::IncludeLoop { depth: 1 })
    );
}

#[tokio::test]
async fn redirect_self_loop() {
    let zone = ZoneFixture::new().with_txt("a.test", "v=spf1 redirect=a.test");
    let outcome = check(&zone, "203.0.113.9", "a.test").await;
    assert_eq!(outcome.result, SpfResult::PermError);
    assert_eq!(outcome.trace.error, Some(ErrorClass::RedirectLoop));
}

#[tokio::test]
async fn include_cannot_deny() {
    // Fail, SoftFail and Neutral inside the include all fall through.
    for target in ["v=spf1 -all", "v=spf1 ~all", "v=spf1 ?all"] {
        let zone = ZoneFixture::new()
            .with_txt("outer.test", "v=spf1 include:inner.test ip4:192.0.2.7 -all")
            .with_txt("inner.test", target);
        let outcome = check(&zone, "192.0.2.7", "outer.test").await;
        assert_eq!(outcome.result, SpfResult::Pass, "target {target:?}");
        assert_eq!(outcome.matched.as_ref().unwrap().term_index, 1);
    }
}

#[tokio::test]
async fn include_pass_uses_directive_qualifier() {
    // A matching include with a fail qualifier denies: the sub-eval passes,
    // the including directive's qualifier decides.
    let zone = ZoneFixture::new()
        .with_txt("outer.test", "v=spf1 -include:inner.test +all")
        .with_txt("inner.test", "v=spf1 ip4:192.0.2.7 -all");
    let outcome = check(&zone, "192.0.2.7", "outer.test").await;
    assert_eq!(outcome.result, SpfResult::Fail);
}

#[tokio::test]
async fn include_target_not_found_is_permerror() {
    let zone = ZoneFixture::new().with_txt("outer.test", "v=spf1 include:gone.test -all");
    let outcome = check(&zone, "203.0.113.9", "outer.test").await;
    assert_eq!(outcome.result, SpfResult::PermError);
    assert_eq!(
        outcome.trace.error,
        Some(ErrorClass::RecordNotFound {
            cause: RecordNotFoundCause::NotExisting
        })
    );
}

#[tokio::test]
async fn redirect_replaces_evaluation() {
    let zone = ZoneFixture::new()
        .with_txt("d1.test", "v=spf1 redirect=d2.test")
        .with_txt("d2.test", "v=spf1 ip4:192.0.2.7 -all");

    let via = check(&zone, "192.0.2.7", "d1.test").await;
    let direct = check(&zone, "192.0.2.7", "d2.test").await;
    assert_eq!(via.result, direct.result);
    assert_eq!(via.result, SpfResult::Pass);

    let via = check(&zone, "203.0.113.9", "d1.test").await;
    assert_eq!(via.result, SpfResult::Fail);
}

#[tokio::test]
async fn redirect_to_missing_record_is_permerror() {
    let zone = ZoneFixture::new().with_txt("d1.test", "v=spf1 redirect=gone.test");
    let outcome = check(&zone, "203.0.113.9", "d1.test").await;
    assert_eq!(outcome.result, SpfResult::PermError);
    assert_eq!(
        outcome.trace.error,
        Some(ErrorClass::RecordNotFound {
            cause: RecordNotFoundCause::NotExisting
        })
    );
}

#[tokio::test]
async fn terms_after_redirect_are_ignored() {
    let zone = ZoneFixture::new()
        .with_txt("d1.test", "v=spf1 redirect=d2.test ip4:203.0.113.9")
        .with_txt("d2.test", "v=spf1 -all");
    let outcome = check(&zone, "203.0.113.9", "d1.test").await;
    assert_eq!(outcome.result, SpfResult::Fail);
}

#[tokio::test]
async fn syntax_error_in_record_is_permerror() {
    let zone = ZoneFixture::new().with_txt("typo.test", "v=spf1 ipv4:192.0.2.1 -all");
    let outcome = check(&zone, "203.0.113.9", "typo.test").await;
    assert_eq!(outcome.result, SpfResult::PermError);
    match outcome.trace.error {
        Some(ErrorClass::SyntaxError { ref findings }) => {
            assert_eq!(findings[0].kind, SyntaxErrorKind::MisspelledIp4)
        }
        ref other => panic!("unexpected {other:?}"),
    }
}

#[tokio::test]
async fn invalid_ip_classifies_separately() {
    let zone = ZoneFixture::new().with_txt("badip.test", "v=spf1 ip4:1.2.3 -all");
    let outcome = check(&zone, "203.0.113.9", "badip.test").await;
    assert_eq!(outcome.result, SpfResult::PermError);
    assert_eq!(
        outcome.trace.error,
        Some(ErrorClass::InvalidIp {
            cause: InvalidIpKind::WrongOctets
        })
    );
}

#[tokio::test]
async fn exists_mechanism() {
    let zone = ZoneFixture::new()
        .with_txt("ex.test", "v=spf1 exists:%{i}.allow.test -all")
        .with_a("203.0.113.9.allow.test", "127.0.0.2".parse().unwrap());
    let hit = check(&zone, "203.0.113.9", "ex.test").await;
    assert_eq!(hit.result, SpfResult::Pass);
    let miss = check(&zone, "203.0.113.10", "ex.test").await;
    assert_eq!(miss.result, SpfResult::Fail);
}

#[tokio::test]
async fn ptr_matches_with_forward_confirmation_and_warns() {
    let zone = ZoneFixture::new()
        .with_txt("p.test", "v=spf1 ptr -all")
        .with_ptr("9.113.0.203.in-addr.arpa", "mail.p.test")
        .with_a("mail.p.test", "203.0.113.9".parse().unwrap());
    let outcome = check(&zone, "203.0.113.9", "p.test").await;
    assert_eq!(outcome.result, SpfResult::Pass);
    assert!(outcome.trace.warnings.iter().any(|w| w.contains("ptr")));
}

#[tokio::test]
async fn ptr_without_confirmation_fails() {
    // Reverse name exists but the forward lookup disagrees.
    let zone = ZoneFixture::new()
        .with_txt("p.test", "v=spf1 ptr -all")
        .with_ptr("9.113.0.203.in-addr.arpa", "mail.p.test")
        .with_a("mail.p.test", "198.51.100.1".parse().unwrap());
    let outcome = check(&zone, "203.0.113.9", "p.test").await;
    assert_eq!(outcome.result, SpfResult::Fail);
}

#[tokio::test]
async fn mx_with_too_many_hosts_is_permerror() {
    let mut zone = ZoneFixture::new().with_txt("many.test", "v=spf1 mx -all");
    for i in 0..11 {
        zone = zone.with_mx("many.test", i, &format!("mx{i}.many.test"));
    }
    let outcome = check(&zone, "203.0.113.9", "many.test").await;
    assert_eq!(outcome.result, SpfResult::PermError);
    assert_eq!(outcome.trace.error, Some(ErrorClass::TooManyLookups));
    assert!(!outcome.trace.warnings.is_empty());
}

#[tokio::test]
async fn first_match_wins_and_later_terms_are_irrelevant() {
    let zone = ZoneFixture::new()
        .with_txt("fm.test", "v=spf1 ip4:192.0.2.7 ~all")
        .with_txt("fm2.test", "v=spf1 ip4:192.0.2.7");
    let with_all = check(&zone, "192.0.2.7", "fm.test").await;
    let without = check(&zone, "192.0.2.7", "fm2.test").await;
    assert_eq!(with_all.result, SpfResult::Pass);
    assert_eq!(without.result, SpfResult::Pass);
    assert_eq!(
        with_all.matched.unwrap().term_index,
        without.matched.unwrap().term_index
    );
}

#[tokio::test]
async fn deterministic_outcomes_including_trace() {
    let zone = primer_zone();
    let a = check(&zone, "198.51.100.5", "example.com").await;
    let b = check(&zone, "198.51.100.5", "example.com").await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn fetch_and_classify_causes() {
    let zone = ZoneFixture::new()
        .with_txt("nospf.test", "google-site-verification=zzz")
        .with_txt("two.test", "v=spf1 -all")
        .with_txt("two.test", "v=spf1 +all")
        .with_error("empty.test", crate::resolver::DnsAnswer::Empty);

    assert_eq!(
        fetch_and_classify("nospf.test", &zone).await.unwrap_err(),
        RecordNotFoundCause::SpfMissing
    );
    assert_eq!(
        fetch_and_classify("absent.test", &zone).await.unwrap_err(),
        RecordNotFoundCause::NotExisting
    );
    assert_eq!(
        fetch_and_classify("two.test", &zone).await.unwrap_err(),
        RecordNotFoundCause::MultipleRecords
    );
    assert_eq!(
        fetch_and_classify("empty.test", &zone).await.unwrap_err(),
        RecordNotFoundCause::EmptyAnswer
    );
}

#[tokio::test]
async fn detect_loops_walks_all_branches() {
    let zone = ZoneFixture::new()
        .with_txt("a.test", "v=spf1 include:ok.test include:b.test -all")
        .with_txt("ok.test", "v=spf1 -all")
        .with_txt("b.test", "v=spf1 include:a.test -all");
    assert_eq!(
        detect_loops("a.test", &zone, DEFAULT_MAX_LOOP_DEPTH).await,
        LoopCheck::IncludeLoop { depth: 1 }
    );

    let clean = ZoneFixture::new()
        .with_txt("a.test", "v=spf1 include:ok.test -all")
        .with_txt("ok.test", "v=spf1 -all");
    assert_eq!(
        detect_loops("a.test", &clean, DEFAULT_MAX_LOOP_DEPTH).await,
        LoopCheck::Clean
    );

    let redir = ZoneFixture::new().with_txt("r.test", "v=spf1 redirect=r.test");
    assert_eq!(
        detect_loops("r.test", &redir, DEFAULT_MAX_LOOP_DEPTH).await,
        LoopCheck::RedirectLoop
    );
}

#[tokio::test]
async fn v6_client_against_ip6_mechanism() {
    let zone = ZoneFixture::new().with_txt("six.test", "v=spf1 ip6:2001:db8::/32 -all");
    let input = SessionInput::new("2001:db8::1".parse().unwrap(), "user@six.test").unwrap();
    let outcome = check_host(&input, "six.test", &zone).await;
    assert_eq!(outcome.result, SpfResult::Pass);

    let v4 = check(&zone, "192.0.2.1", "six.test").await;
    assert_eq!(v4.result, SpfResult::Fail);
}
