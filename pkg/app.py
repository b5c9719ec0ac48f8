"""
検証レポート閲覧 Streamlit アプリ
出力ディレクトリの JSON レポートと CSV を表で表示し、プリセットを実行できる。
"""
import streamlit as st
import pandas as pd

from config_manager import list_presets, load_config
from error_display_util import format_error_display
from report_writer import checks_frame, load_reports, load_table
from sim_errors import SimulationError
from suites import run_suite

DEFAULT_OUTPUT_DIR = "output"

# ページ設定
st.set_page_config(
    page_title="分数階確率 Navier-Stokes 検証レポート",
    page_icon="📈",
    layout="wide"
)

if "output_dir" not in st.session_state:
    st.session_state.output_dir = DEFAULT_OUTPUT_DIR

with st.sidebar:
    st.header("⚙️ 設定")
    st.session_state.output_dir = st.text_input("出力ディレクトリ", value=st.session_state.output_dir)
    st.markdown("---")
    with st.expander("📋 使い方", expanded=False):
        st.markdown("1. 出力ディレクトリを指定  \n2. 「レポート」でスイートを選択  \n3. 検査結果と CSV を確認  \n4. 「プリセット実行」で再計算")

st.title("📈 検証レポート")

tab_reports, tab_run = st.tabs(["📊 レポート", "▶️ プリセット実行"])

with tab_reports:
    reports = load_reports(st.session_state.output_dir)
    if not reports:
        st.info(f"{st.session_state.output_dir} にレポートがありません。プリセットを実行するか、cli.py run の出力先を指定してください。")
    else:
        labels = [f"{r['suite']}  ({r['_path']})" for r in reports]
        idx = st.selectbox("レポート", options=list(range(len(reports))), format_func=lambda i: labels[i])
        report = reports[idx]
        if report.get("passed"):
            st.success(f"✅ {report['suite']}: すべての検査に合格（seed={report['seed']}, {report.get('wall_clock', 0):.1f} 秒）")
        else:
            st.error(f"❌ {report['suite']}: 不合格の検査があります（seed={report['seed']}）")
        st.subheader("検査")
        st.dataframe(checks_frame(report), use_container_width=True, hide_index=True)
        if report.get("details"):
            with st.expander("補足", expanded=False):
                st.json(report["details"])
        for name in report.get("artifacts", []):
            st.subheader(f"📄 {name}")
            try:
                st.dataframe(load_table(report, name), use_container_width=True, hide_index=True)
            except (OSError, pd.errors.ParserError) as e:
                st.warning(format_error_display(e, "CSV の読み込み"))
        with st.expander("設定の写し", expanded=False):
            st.json(report.get("config", {}))

with tab_run:
    presets = list_presets()
    if not presets:
        st.info("config/presets に .ini がありません。")
    else:
        chosen = st.selectbox("プリセット", options=presets, format_func=lambda p: p.stem)
        st.code(chosen.read_text(encoding="utf-8"), language="ini")
        if st.button("実行", type="primary"):
            try:
                cfg = load_config(chosen).with_overrides(output_dir=f"{st.session_state.output_dir}/{chosen.stem}")
                with st.spinner(f"{cfg.suite} を実行中..."):
                    result = run_suite(cfg)
                if result.passed:
                    st.success("✅ すべての検査に合格しました。「レポート」タブで確認できます。")
                else:
                    st.warning("不合格の検査があります。「レポート」タブで確認してください。")
            except (SimulationError, ValueError, OSError) as e:
                st.error(format_error_display(e, "スイートの実行"))
