// Parse a Complete Journey style extract, split it into day windows and
// write the canonical CSV. Run with `cargo run --example ingest_transactions`.

use basketflow::ingest::{parse_transactions, summarize, window_stream, write_canonical, TransactionRecordFormat};

const TRANSACTIONS: &str = "\
household_key,BASKET_ID,DAY,PRODUCT_ID,QUANTITY,SALES_VALUE
2375,26984851472,1,1004906,1,1.39
2375,26984851472,1,1033142,1,0.82
2375,26984851472,1,1036325,1,0.99
1364,26984896261,1,842930,1,2.19
1364,26984896261,1,897044,1,2.99
1364,26984896261,1,920955,1,3.09
1130,26984905972,2,833025,1,0.50
1130,26984905972,2,1004906,1,1.39
2375,27021022215,3,1004906,1,1.39
2375,27021022215,3,1036325,1,0.99
bad,row,with,too,few
";

pub fn main() {
    let parsed = parse_transactions(TRANSACTIONS.as_bytes(), &TransactionRecordFormat::complete_journey())
        .expect("header has every mapped column");
    for e in &parsed.skipped {
        println!("skipped line {}: {}", e.line, e.message);
    }

    let s = summarize(&parsed.baskets);
    println!("{} users, {} products, {} baskets over {} days", s.users, s.products, s.baskets, s.days);

    let windows = window_stream(&parsed.baskets, 1).expect("parser output is sorted");
    for w in &windows {
        let ids: Vec<&str> = w.baskets.iter().map(|b| b.id.as_str()).collect();
        println!("window {} [{} .. {}): {:?}", w.index, w.start, w.end, ids);
    }

    let mut out = Vec::new();
    write_canonical(&parsed.baskets, &mut out).unwrap();
    print!("{}", String::from_utf8(out).unwrap());
}
