"""
Data model: scenarios, schedules and link evaluation.
"""
