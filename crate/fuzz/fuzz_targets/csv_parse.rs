#![no_main]

use libfuzzer_sys::fuzz_target;
use relmargin::io::{parse_csv_str, CsvSchema};

// First byte selects headered vs headerless parsing, the rest is the document.
fuzz_target!(|data: &[u8]| {
    if let Some((&mode, rest)) = data.split_first() {
        if let Ok(text) = std::str::from_utf8(rest) {
            let schema = CsvSchema {
                has_header: mode & 1 == 0,
                ..CsvSchema::default()
            };
            let _ = parse_csv_str(text, &schema);
        }
    }
});
