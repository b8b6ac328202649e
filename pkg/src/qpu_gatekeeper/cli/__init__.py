"""Command-line surfaces: the login client and the admin tool."""
