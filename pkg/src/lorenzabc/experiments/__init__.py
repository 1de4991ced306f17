"""Configuration, reports and the command-line front end."""
