use super::{GatewayError, Mode};
use crate::mapper;
use crate::workflow::{Step, StepType};

/// Renders an input step's template for the channel.
pub fn render_menu(step: &Step, mode: Mode) -> Result<String, GatewayError> {
    render_text(&step.message_template, step.step_type, mode)
}

/// Like [`render_menu`] for already slot-filled text.
pub fn render_text(text: &str, step_type: StepType, mode: Mode) -> Result<String, GatewayError> {
    if mode == Mode::Sms {
        return Ok(text.to_string());
    }
    if !matches!(step_type, StepType::OptionSelection | StepType::ValueEntry) {
        return Err(GatewayError::NotRenderable(step_type));
    }
    let mut has_options = false;
    let mut lines: Vec<String> = text
        .lines()
        .map(|line| match mapper::option_lines(line).into_iter().next() {
            Some((n, option)) => {
                has_options = true;
                format!("{n}) {option}")
            }
            None => line.to_string(),
        })
        .collect();
    lines.push(if has_options { "Reply with choice" } else { "Reply with value" }.to_string());
    Ok(lines.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::compile;

    fn steps() -> Vec<Step> {
        compile(include_str!("../../fixtures/order_financing_4step.flow")).unwrap().steps
    }

    #[test]
    fn ussd_numbers_options() {
        let s = &steps()[1];
        assert_eq!(
            render_menu(s, Mode::Ussd).unwrap(),
            "1) Pay 1050 in 30 days\n2) Pay 1100 in 60 days\nReply with choice"
        );
        assert_eq!(render_menu(s, Mode::Sms).unwrap(), s.message_template);
    }

    #[test]
    fn value_entry_and_notification() {
        let all = steps();
        assert_eq!(
            render_menu(&all[3], Mode::Ussd).unwrap(),
            "Enter amount to repay for Order No {order_no}\nReply with value"
        );
        assert!(matches!(render_menu(&all[2], Mode::Ussd), Err(GatewayError::NotRenderable(StepType::Notification))));
    }
}
