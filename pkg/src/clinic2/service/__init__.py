"""Deployable service: accounts, sessions, notifications, HTTP API, CLI."""
