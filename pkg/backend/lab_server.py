"""
Lab Server - read-only REST API over the lab store.

This server provides:
- Generated units, fitness reports, search traces and study summaries
- The shipped fixture units, parsed through the unit codec
- CORS support so notebooks and plotting pages on other ports can read it
"""

import logging
from typing import Optional

from flask import Flask, jsonify
from flask_cors import CORS

from lab_store import LabStore, get_default_store
from settings import FIXTURES_DIR, configure_logging, get_settings
from unitspace import describe_unit, load_fixture_units, unit_to_dict

logger = logging.getLogger(__name__)


def create_app(store: Optional[LabStore] = None) -> Flask:
    """Build the Flask app over `store` (the default store if omitted)."""
    app = Flask(__name__)
    CORS(app)  # Enable CORS for all routes
    lab_store = store or get_default_store()

    # ========================================================================
    # API Routes
    # ========================================================================

    @app.route("/api/health", methods=["GET"])
    def health_check():
        """Health check endpoint."""
        return jsonify({"status": "ok", "service": "lab-server"})

    @app.route("/api/units", methods=["GET"])
    def get_units():
        return jsonify(lab_store.list_records("units"))

    @app.route("/api/units/<key>", methods=["GET"])
    def get_unit(key: str):
        record = lab_store.get_record("units", key)
        if not record:
            return jsonify({"error": "Unit not found"}), 404
        return jsonify(record)

    @app.route("/api/reports/<key>", methods=["GET"])
    def get_report(key: str):
        record = lab_store.get_record("reports", key)
        if not record:
            return jsonify({"error": "Report not found"}), 404
        return jsonify(record)

    @app.route("/api/traces", methods=["GET"])
    def get_traces():
        return jsonify(lab_store.list_records("traces"))

    @app.route("/api/studies", methods=["GET"])
    def get_studies():
        return jsonify(lab_store.list_records("studies"))

    @app.route("/api/fixtures", methods=["GET"])
    def get_fixtures():
        """The shipped units with a one-line description each."""
        units = load_fixture_units(FIXTURES_DIR)
        return jsonify([{**unit_to_dict(u), "description": describe_unit(u)} for u in units])

    @app.errorhandler(404)
    def not_found(_error):
        return jsonify({"error": "Not found"}), 404

    return app


# ============================================================================
# Main Entry Point
# ============================================================================

def main(port: Optional[int] = None) -> None:
    """Start the lab server."""
    settings = get_settings()
    configure_logging(settings.log_level)
    port = port or settings.lab_port

    print(f"Lab Server starting on http://localhost:{port}")
    print(f"API available at http://localhost:{port}/api/units")

    create_app().run(host="0.0.0.0", port=port, debug=settings.flask_debug)


if __name__ == "__main__":
    main()
