#!/usr/bin/env python3
"""
fovsafe - Formation Safety Dashboard
Streamlit front end for running scenarios and inspecting their logs
"""

import os
import sys
import json
from pathlib import Path

import streamlit as st

# Add src to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root / "src"))
sys.path.insert(0, str(project_root))

from dotenv import load_dotenv
load_dotenv()

from exceptions import ConfigError
from scenario import load_scenario
from harness import run_scenario
from export import compare_summary, export_csv, pair_frame
from utils.figures import panel_frames, status_counts


st.set_page_config(
    page_title="fovsafe - Formation Safety",
    page_icon="🤖",
    layout="wide",
    initial_sidebar_state="expanded"
)

OUTPUT_DIR = Path(os.getenv("OUTPUT_DIR", project_root / "outputs"))
SCENARIO_DIR = project_root / "scenarios"


def initialize_session_state():
    """Initialize session state variables"""
    if 'runs' not in st.session_state:
        st.session_state.runs = {}
    if 'scenario' not in st.session_state:
        st.session_state.scenario = None


def render_sidebar():
    """Scenario picker and run buttons"""
    with st.sidebar:
        st.markdown("# 🤖 fovsafe")
        st.caption("Perception-aware leader-follower formations")
        st.markdown("---")

        files = sorted(SCENARIO_DIR.glob("*.yaml"))
        if not files:
            st.error("❌ No scenario files in scenarios/")
            return

        choice = st.selectbox("Scenario", files, format_func=lambda p: p.stem)
        gamma = st.slider("CBF gain γ", 0.05, 2.0, 0.45, 0.05)
        delay = st.number_input("Message delay (steps)", 0, 20, 0)

        overrides = [("safety.gamma", str(gamma)), ("message_delay_steps", str(delay))]

        col1, col2 = st.columns(2)
        with col1:
            run_clicked = st.button("▶️ Run", use_container_width=True)
        with col2:
            compare_clicked = st.button("⚖️ Compare", use_container_width=True)

        if run_clicked or compare_clicked:
            try:
                cfg = load_scenario(choice, overrides)
            except (ConfigError, OSError) as e:
                st.error(f"❌ {e}")
                return

            arms = [("filter_on", True), ("filter_off", False)] if compare_clicked \
                else [("run", cfg.safety_filter_enabled)]
            st.session_state.runs = {}
            with st.spinner("Simulating..."):
                for label, enabled in arms:
                    log, metrics = run_scenario(cfg.with_filter(enabled))
                    export_csv(log, metrics, OUTPUT_DIR / f"{cfg.name}_dashboard" / label)
                    st.session_state.runs[label] = (log, metrics)
            st.session_state.scenario = cfg

        st.markdown("---")
        st.caption(f"📁 Outputs: {OUTPUT_DIR}")


def render_run(label, log, metrics, cfg):
    st.markdown(f"### {label}")

    cols = st.columns(4)
    cols[0].metric("Steps", metrics.steps)
    cols[1].metric("FOV violations", metrics.total_violations)
    cols[2].metric("Infeasible QP steps", metrics.total_infeasible)
    cols[3].metric("Degenerate", "yes" if metrics.degenerate else "no")

    for pair in range(1, log.n_pairs + 1):
        frame = pair_frame(log, pair)
        if frame.empty:
            continue
        panels = panel_frames(frame, cfg.safety.psi_max, cfg.safety.D_min)
        with st.expander(f"Pair {pair}", expanded=(pair == 1)):
            st.caption("α vs setpoint")
            st.line_chart(panels["alpha"])
            st.caption("L vs setpoint")
            st.line_chart(panels["L"])
            st.caption("φ vs field of view")
            st.line_chart(panels["phi"])
            st.bar_chart(status_counts(frame))

    with st.expander("📊 Metrics JSON"):
        st.code(json.dumps(metrics.to_dict(), indent=2), language="json")


def main():
    """Main application entry point"""
    initialize_session_state()
    render_sidebar()

    st.markdown("# 🤖 Formation Safety Dashboard")
    st.caption("Runs are post-hoc: simulate from the sidebar, then inspect the logs")

    runs = st.session_state.runs
    if not runs:
        st.info("👋 Pick a scenario in the sidebar and press **Run** or **Compare**.")
        return

    cfg = st.session_state.scenario
    if "filter_on" in runs and "filter_off" in runs:
        summary = compare_summary(runs["filter_on"][1], runs["filter_off"][1])
        st.dataframe(summary, use_container_width=True)
        left, right = st.columns(2)
        with left:
            render_run("Safety filter on", *runs["filter_on"], cfg)
        with right:
            render_run("Safety filter off", *runs["filter_off"], cfg)
    else:
        render_run("Run", *runs["run"], cfg)


if __name__ == "__main__":
    main()
