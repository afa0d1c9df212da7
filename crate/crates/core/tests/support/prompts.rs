//! Prompts built from fixed attachments, with their golden files.

use std::path::PathBuf;

use homerule::detect::detect_all;
use homerule::fixtures;
use homerule::io::parse_incomplete_device_list;
use homerule::llm::{
    build_prompt_code_generation, build_prompt_device_extraction, build_prompt_rule_generation,
    build_prompt_rule_optimization, Prompt,
};

const LIGHT_MANUAL: &str = "Smart bulb. Tap once to switch on, tap again to switch off.\n\
The dimmer ring selects a low or a high brightness level.\n";

pub fn prompts() -> Vec<(&'static str, Prompt)> {
    let heater = fixtures::HEATER_AC.parse().unwrap();
    let light = fixtures::LIGHT.parse().unwrap();
    let incomplete =
        parse_incomplete_device_list(r#"{"light1": {"type": "light", "location": "bedroom"}}"#).unwrap();
    let reports = detect_all(&fixtures::HEATER_AC.system().unwrap());
    vec![
        (
            "device_extraction",
            build_prompt_device_extraction(&incomplete, &[("light.txt".into(), LIGHT_MANUAL.into())]).unwrap(),
        ),
        ("rule_generation_basic", build_prompt_rule_generation(&light.devices, None, false).unwrap()),
        (
            "rule_generation_conflicts",
            build_prompt_rule_generation(&heater.devices, Some("Keep the room between 18 and 27 degrees."), true)
                .unwrap(),
        ),
        ("code_generation", build_prompt_code_generation(&heater.devices, &heater.rules).unwrap()),
        ("rule_optimization", build_prompt_rule_optimization(&heater.rules, &reports).unwrap()),
    ]
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/prompts").join(format!("{name}.txt"))
}
