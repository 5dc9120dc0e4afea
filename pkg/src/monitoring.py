"""
Monitoring and Logging Module
Structured logging, safety-filter event records, and run metrics persistence
"""

import os
import json
import logging
import logging.handlers
from pathlib import Path
from datetime import datetime, timezone
from typing import Dict, Any, Sequence
import sqlite3

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).parent.parent


class JSONFormatter(logging.Formatter):
    """One JSON object per line, with the optional `context` dict attached"""

    def format(self, record):
        log_entry = {
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage()
        }
        if hasattr(record, 'context'):
            log_entry['context'] = record.context
        if record.exc_info:
            log_entry['exception'] = self.formatException(record.exc_info)
        return json.dumps(log_entry, default=str)


def setup_logging(
    log_dir: str = None,
    log_level: str = None,
    app_name: str = "fovsafe"
):
    """
    Set up console and rotating file logging.

    Args:
        log_dir: Directory for log files (LOG_DIR, else <project>/logs)
        log_level: Logging level (LOG_LEVEL, else INFO)
        app_name: Application name for log files
    """
    from dotenv import load_dotenv
    load_dotenv()

    if log_dir is None:
        log_dir = Path(os.getenv('LOG_DIR', PROJECT_ROOT / "logs"))
    else:
        log_dir = Path(log_dir)

    log_dir.mkdir(parents=True, exist_ok=True)

    if log_level is None:
        log_level = os.getenv('LOG_LEVEL', 'INFO')

    numeric_level = getattr(logging, log_level.upper(), logging.INFO)

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)

    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)
        handler.close()

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    console_handler.setLevel(numeric_level)
    root_logger.addHandler(console_handler)

    file_handler = logging.handlers.RotatingFileHandler(
        log_dir / f"{app_name}.log",
        maxBytes=10*1024*1024,  # 10 MB
        backupCount=7
    )
    file_handler.setFormatter(formatter)
    file_handler.setLevel(numeric_level)
    root_logger.addHandler(file_handler)

    # Filter events are DEBUG records; the JSON stream keeps whatever the root level lets through
    json_handler = logging.handlers.RotatingFileHandler(
        log_dir / f"{app_name}_json.log",
        maxBytes=10*1024*1024,
        backupCount=7
    )
    json_handler.setFormatter(JSONFormatter())
    json_handler.setLevel(numeric_level)
    root_logger.addHandler(json_handler)

    logger.info(f"Logging configured: level={log_level}, dir={log_dir}")


def _emit(name: str, level: int, msg: str, context: Dict[str, Any]):
    event_logger = logging.getLogger(name)
    if not event_logger.isEnabledFor(level):
        return

    log_record = logging.LogRecord(
        name=name,
        level=level,
        pathname='',
        lineno=0,
        msg=msg,
        args=(),
        exc_info=None
    )
    log_record.context = context
    event_logger.handle(log_record)


def log_filter_event(
    pair: int,
    t: float,
    h: Sequence[float],
    status: str,
    active_set: Sequence[int],
    u_nom: Sequence[float],
    u_safe: Sequence[float],
    **extra
):
    """Log one safety-filter invocation"""
    _emit(
        'fovsafe.safety',
        logging.DEBUG,
        f"Safety filter pair={pair} t={t:.2f} status={status}",
        {
            'pair': pair,
            't': round(float(t), 6),
            'h': [float(x) for x in h],
            'status': status,
            'active_set': [int(k) for k in active_set],
            'u_nom': [float(x) for x in u_nom],
            'u_safe': [float(x) for x in u_safe],
            **extra
        }
    )


def log_run_event(
    scenario: str,
    event_type: str,
    severity: str = 'INFO',
    details: Dict = None
):
    """Log a run-level event (start, finish, fault)"""
    level = getattr(logging, severity.upper(), logging.INFO)
    _emit(
        'fovsafe.runs',
        level,
        f"Run event: {event_type} ({scenario})",
        {
            'scenario': scenario,
            'event_type': event_type,
            'details': details or {}
        }
    )


class MetricsCollector:
    """Store run metrics in SQLite"""

    def __init__(self, db_path: str = None):
        if db_path is None:
            from dotenv import load_dotenv
            load_dotenv()
            db_path = os.getenv('METRICS_DB', str(PROJECT_ROOT / "data" / "runs.db"))

        self.db_path = str(db_path)
        Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)
        self._ensure_tables()

    def _ensure_tables(self):
        """Create database tables if they don't exist"""
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                label TEXT,
                scenario TEXT,
                filter_enabled INTEGER,
                seed INTEGER,
                steps INTEGER,
                degenerate INTEGER,
                infeasible_steps INTEGER,
                violation_steps INTEGER,
                timestamp DATETIME DEFAULT CURRENT_TIMESTAMP
            )
        """)

        cursor.execute("""
            CREATE TABLE IF NOT EXISTS pair_metrics (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id INTEGER,
                pair INTEGER,
                min_h1 REAL,
                min_h2 REAL,
                min_h3 REAL,
                min_h4 REAL,
                violation_steps INTEGER,
                blind_steps INTEGER,
                infeasible_steps INTEGER,
                filter_active_steps INTEGER,
                first_violation_t REAL,
                first_blind_t REAL,
                bearing_mae_raw REAL,
                bearing_mae_filtered REAL,
                depth_rejections INTEGER,
                FOREIGN KEY (run_id) REFERENCES runs(id)
            )
        """)

        cursor.execute("CREATE INDEX IF NOT EXISTS idx_runs_timestamp ON runs(timestamp)")
        cursor.execute("CREATE INDEX IF NOT EXISTS idx_pair_run ON pair_metrics(run_id)")

        conn.commit()
        conn.close()

    def record_run(self, metrics, label: str = None) -> int:
        """
        Record a RunMetrics object and its pairs.

        Returns:
            Row id of the stored run
        """
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.execute("""
            INSERT INTO runs (
                label, scenario, filter_enabled, seed, steps,
                degenerate, infeasible_steps, violation_steps
            ) VALUES (?, ?, ?, ?, ?, ?, ?, ?)
        """, (
            label, metrics.scenario, int(metrics.filter_enabled), metrics.seed,
            metrics.steps, int(metrics.degenerate),
            metrics.total_infeasible, metrics.total_violations
        ))
        run_id = cursor.lastrowid

        for pm in metrics.pairs:
            cursor.execute("""
                INSERT INTO pair_metrics (
                    run_id, pair, min_h1, min_h2, min_h3, min_h4,
                    violation_steps, blind_steps, infeasible_steps,
                    filter_active_steps, first_violation_t, first_blind_t,
                    bearing_mae_raw, bearing_mae_filtered, depth_rejections
                ) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            """, (
                run_id, pm.pair, *[float(x) for x in pm.min_h],
                pm.violation_steps, pm.blind_steps, pm.infeasible_steps,
                pm.filter_active_steps, pm.first_violation_t, pm.first_blind_t,
                pm.bearing_mae_raw, pm.bearing_mae_filtered, pm.depth_rejections
            ))

        conn.commit()
        conn.close()

        return run_id

    def get_stats(self, hours: int = None) -> Dict:
        """Summary of stored runs, optionally restricted to the last N hours"""
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        where, params = "", ()
        if hours is not None:
            where, params = "WHERE timestamp > datetime('now', ?)", (f'-{hours} hours',)

        cursor.execute(f"""
            SELECT COUNT(*), COALESCE(SUM(infeasible_steps), 0),
                   COALESCE(SUM(violation_steps), 0), COALESCE(SUM(degenerate), 0),
                   COALESCE(SUM(filter_enabled), 0)
            FROM runs {where}
        """, params)
        total_runs, infeasible, violations, degenerate, filtered_runs = cursor.fetchone()

        conn.close()

        return {
            'total_runs': total_runs,
            'filtered_runs': filtered_runs,
            'infeasible_steps': infeasible,
            'violation_steps': violations,
            'degenerate_runs': degenerate,
            'period_hours': hours
        }


if __name__ == "__main__":
    setup_logging(log_level='DEBUG')

    print("Testing monitoring module...")

    log_filter_event(
        pair=1, t=0.05, h=[0.9, 6.5, 0.52, 0.52], status="nominal_feasible",
        active_set=[], u_nom=[0.5, 0.0], u_safe=[0.5, 0.0]
    )
    log_run_event("demo", "run_finished", details={"steps": 10})

    stats = MetricsCollector().get_stats()
    print(f"Stats: {stats}")

    print("\n✅ Monitoring tests passed!")
