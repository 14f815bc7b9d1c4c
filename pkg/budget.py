#!/usr/bin/env python3
# budget.py
from repeater_budget import create_app

app = create_app()

if __name__ == "__main__":
    app()
