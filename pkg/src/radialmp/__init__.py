"""(build in progress)"""
