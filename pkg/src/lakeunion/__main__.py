#!/usr/bin/env python

"""lakeunion CLI."""

from lakeunion import main


main()
